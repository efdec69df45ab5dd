use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::kernel::Term;

/// A host computation reachable through `builtin(name, args...)`.
///
/// The last [`Builtin::outputs`] arguments are outputs; the rest are inputs
/// and must be ground when the builtin is called. Implementations must be
/// pure and deterministic.
pub trait Builtin: Send + Sync {
    fn outputs(&self) -> usize {
        0
    }

    /// Returns the output terms, or `None` when the builtin fails as a
    /// condition. `Err` aborts the step.
    fn call(&self, inputs: &[Term]) -> Result<Option<Vec<Term>>, String>;
}

struct FnBuiltin<F> {
    outputs: usize,
    f: F,
}

impl<F> Builtin for FnBuiltin<F>
where
    F: Fn(&[Term]) -> Result<Option<Vec<Term>>, String> + Send + Sync,
{
    fn outputs(&self) -> usize {
        self.outputs
    }

    fn call(&self, inputs: &[Term]) -> Result<Option<Vec<Term>>, String> {
        (self.f)(inputs)
    }
}

#[derive(Clone, Default)]
pub struct BuiltinRegistry {
    entries: BTreeMap<String, Arc<dyn Builtin>>,
}

impl BuiltinRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, builtin: impl Builtin + 'static) {
        self.entries.insert(name.into(), Arc::new(builtin));
    }

    pub fn register_fn<F>(&mut self, name: impl Into<String>, outputs: usize, f: F)
    where
        F: Fn(&[Term]) -> Result<Option<Vec<Term>>, String> + Send + Sync + 'static,
    {
        self.register(name, FnBuiltin { outputs, f });
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Builtin>> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl fmt::Debug for BuiltinRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.names()).finish()
    }
}
