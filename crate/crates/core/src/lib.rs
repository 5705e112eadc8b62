pub mod bhatskeide;
pub mod gallery;
pub mod lab;
pub mod numkit;
pub mod simcert;
pub mod tensorsplit;
