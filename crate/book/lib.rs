// mdbook cannot run listings that depend on workspace crates, so every
// chapter is pulled in here as a module doc and `cargo test` runs its code
// blocks as doc-tests. A failing doc-test names the module, which maps one to
// one onto a chapter file.

#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("src/images.md")]
pub mod images {}
#[doc = include_str!("src/boxes.md")]
pub mod boxes {}
#[doc = include_str!("src/augmentation.md")]
pub mod augmentation {}
#[doc = include_str!("src/synthetic.md")]
pub mod synthetic {}
#[doc = include_str!("src/detector.md")]
pub mod detector {}
#[doc = include_str!("src/training.md")]
pub mod training {}
#[doc = include_str!("src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("src/cli.md")]
pub mod cli {}
