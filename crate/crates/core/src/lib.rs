//! Detection of cryptographic API misuses in Python code.
//!
//! The pipeline parses each file into a [`syntax::SyntaxTree`], matches call
//! sites against the rule [`catalog`], backward-slices the security-relevant
//! argument with the [`slicer`] and classifies the result in the
//! [`analyzer`]. [`corpus`] drives whole project trees and [`report`] turns
//! the findings into aggregate metrics.

pub mod syntax;
pub mod catalog;
pub mod slicer;
pub mod analyzer;
pub mod corpus;
pub mod report;
pub mod cli;
