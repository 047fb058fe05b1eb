#![allow(dead_code)]

pub mod remesh;
