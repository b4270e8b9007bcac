pub mod closed_forms;
pub mod evolve;
pub mod fit;
pub mod moments;
pub mod observables;
pub mod sequence;
pub mod special;
pub mod summation;
pub mod tridiag;
pub mod wnumber;
