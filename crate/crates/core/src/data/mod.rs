//! Synthetic benchmark analogs and dataset files.

mod generators;
mod io;

pub use generators::{
    circulant, cycle, erdos_renyi, gen_ba_shapes, gen_color_count, gen_tree_cycle, generate,
    random_connected_graph, random_tree_edges, structural_features, Family, GenSpec, BA_BASE_NODES,
    DEGREE_BUCKETS,
};
pub use io::{
    dataset_from_json, dataset_hash, dataset_to_json, load_dataset, save_dataset,
    save_dataset_with_metadata,
};
