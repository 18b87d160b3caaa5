//! Labels, dataset layout, splitting, preprocessing, and augmentation.

mod augment;
mod expand;
mod labels;
mod manifest;
mod preprocess;

pub use augment::{augment, augment_stack, random_op_stack, training_op_stack, AugmentKind, AugmentOp, MIN_VISIBILITY};
pub use expand::{augmented_copy, expand_samples, expand_training_set};
pub use labels::{parse_label_file, write_label_file, Annotation};
pub use manifest::{
    split_dataset, train_count, write_sample, DatasetManifest, ManifestEntry, Sample, Split, MANIFEST_FILE,
};
pub use preprocess::{letterbox_boxes, orient_sample, preprocess, rotate_bbox};
