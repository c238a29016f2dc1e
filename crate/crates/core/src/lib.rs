pub mod chaos;
pub mod hermite;
pub mod independence;
pub mod io;
pub mod montecarlo;
pub mod sequences;
pub mod tensor;
