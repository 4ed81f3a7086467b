//! Network specifications, shape inference, initialization, momentum-SGD
//! training and the checkpoint format.

mod checkpoint;
mod network;
mod spec;
mod train;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, write_atomic, CheckpointMeta,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use network::{argmax, stack, BatchResult, ForwardTrace, LabeledNetwork, Layer, Network, SampleResult};
pub use spec::{LayerSpec, NetworkSpec, ShapeTrace};
pub use train::{train, EpochStats, History, MomentumSgd, NoObserver, TrainConfig, TrainObserver};

use crate::tensor::Padding;

/// The face-parsing network with the published layer table: four conv/pool
/// pairs on a 250x250 input, two fully connected layers, softmax head.
pub fn paper_network(input_channels: usize, class_count: usize, hidden: usize) -> NetworkSpec {
    paper_network_sized(input_channels, 250, class_count, hidden)
}

/// [`paper_network`] on a `side` x `side` input. Padding is resolved so the
/// declared per-layer output sizes still hold; sides 250 and 251 both work.
pub fn paper_network_sized(input_channels: usize, side: usize, class_count: usize, hidden: usize) -> NetworkSpec {
    let mut layers = Vec::new();
    let table = [
        ("CL-1", "PL-1", 2, 96, 124, 62),
        ("CL-2", "PL-2", 2, 256, 30, 15),
        ("CL-3", "PL-3", 1, 316, 12, 6),
        ("CL-4", "PL-4", 2, 512, 4, 2),
    ];
    for (conv, pool, conv_stride, maps, conv_out, pool_out) in table {
        layers.push(LayerSpec::conv(5, conv_stride, maps).named(conv).declared([conv_out; 2]));
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::max_pool(3, 2).named(pool).declared([pool_out; 2]));
    }
    layers.push(LayerSpec::Dense { outputs: hidden });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::Dense { outputs: class_count });
    layers.push(LayerSpec::SoftmaxHead);
    NetworkSpec {
        input_shape: [input_channels, side, side],
        class_count,
        layers,
    }
}

/// Small two conv/pool network (16 and 32 maps, dense 64) for desk-scale
/// runs. Convolutions are unpadded 3x3; each 2x2 pool pads one trailing
/// row/column when its input extent is odd, so every stage shrinks.
pub fn toy_network(input_shape: [usize; 3], class_count: usize) -> NetworkSpec {
    let [_, h, w] = input_shape;
    let (h1, w1) = (h.saturating_sub(2), w.saturating_sub(2));
    let (h2, w2) = (h1.div_ceil(2), w1.div_ceil(2));
    let (h3, w3) = (h2.saturating_sub(2), w2.saturating_sub(2));
    NetworkSpec {
        input_shape,
        class_count,
        layers: vec![
            LayerSpec::conv(3, 1, 16).padded(Padding::NONE),
            LayerSpec::Relu,
            LayerSpec::max_pool(2, 2).padded(Padding::new(0, h1 % 2, 0, w1 % 2)),
            LayerSpec::conv(3, 1, 32).padded(Padding::NONE),
            LayerSpec::Relu,
            LayerSpec::max_pool(2, 2).padded(Padding::new(0, h3 % 2, 0, w3 % 2)),
            LayerSpec::Dense { outputs: 64 },
            LayerSpec::Relu,
            LayerSpec::Dense { outputs: class_count },
            LayerSpec::SoftmaxHead,
        ],
    }
}
