//! placeholder
pub struct GmmModel<T>(pub std::marker::PhantomData<T>);
pub struct ShotBatch<T>(pub std::marker::PhantomData<T>);
pub struct AssignmentReport<T>(pub std::marker::PhantomData<T>);
