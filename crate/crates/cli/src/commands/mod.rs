pub mod extract;
pub mod gradcheck;
pub mod inspect;
pub mod model;
pub mod split;
