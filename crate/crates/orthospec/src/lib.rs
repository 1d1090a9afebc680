pub mod error;
pub mod numerics;
pub mod recurrence;
pub mod contfrac;
pub mod elliptic;
pub mod det_markov;
pub mod indet;
pub mod quartic;
