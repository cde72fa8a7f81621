use serde::{Deserialize, Serialize};

use super::NetError;

/// Which multi-scale feature discriminator the model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscriminatorKind {
    Flatten,
    Cascade,
}

/// Static architecture description.
///
/// Every encoder layer halves the spatial dimensions, so the input must be
/// divisible by `2^encoder_layers`. Small inputs use fewer layers; the
/// layer-indexed defaults are clipped to the available range accordingly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub input_height: usize,
    pub input_width: usize,
    #[serde(default = "default_input_channels")]
    pub input_channels: usize,
    pub encoder_layers: usize,
    pub channels_per_layer: Vec<usize>,
    pub class_count: usize,
    /// Layers whose decoder stages emit depth predictions (resolution of
    /// that layer).
    pub depth_output_layers: Vec<usize>,
    pub triplet_layers: Vec<usize>,
    pub retrieval_layers: Vec<usize>,
    pub discriminator_kind: DiscriminatorKind,
    /// Pyramid levels fed to the flatten discriminator. The cascade
    /// discriminator always consumes all levels.
    pub discriminator_layers: Vec<usize>,
    #[serde(default = "default_fd_hidden")]
    pub fd_hidden: (usize, usize),
    /// Reference width of the cascade discriminator's final affine layer at
    /// the original training resolution. The graph always sizes that layer
    /// from the actual flattened dimension (`cd_flatten_dim`), which equals
    /// this value only for channel plans that reproduce it.
    #[serde(default = "default_cd_final_dim")]
    pub cd_final_dim: usize,
}

fn default_input_channels() -> usize {
    3
}

fn default_fd_hidden() -> (usize, usize) {
    (64, 64)
}

fn default_cd_final_dim() -> usize {
    1536
}

const DEFAULT_CHANNELS: [usize; 8] = [16, 32, 64, 64, 128, 128, 256, 256];

fn clipped(layers: &[usize], max: usize) -> Vec<usize> {
    let mut v: Vec<usize> = layers.iter().copied().filter(|&l| l <= max).collect();
    v.sort_unstable();
    if v.is_empty() {
        // very shallow configs keep every layer rather than none
        v = (1..=max).collect();
    }
    v
}

impl NetConfig {
    /// Eight-layer configuration at the original crop resolution.
    pub fn paper_default(class_count: usize, kind: DiscriminatorKind) -> Self {
        Self::with_dims(256, 1024, 8, class_count, kind, 1.0)
    }

    /// Small configuration for desk-scale experiments.
    pub fn toy_default(class_count: usize, kind: DiscriminatorKind) -> Self {
        Self::with_dims(64, 64, 5, class_count, kind, 1.0)
    }

    /// Build a configuration with defaults derived from the layer count.
    pub fn with_dims(
        input_height: usize,
        input_width: usize,
        encoder_layers: usize,
        class_count: usize,
        kind: DiscriminatorKind,
        width_multiplier: f64,
    ) -> Self {
        let channels: Vec<usize> = DEFAULT_CHANNELS
            .iter()
            .take(encoder_layers)
            .map(|&c| (((c as f64) * width_multiplier).round() as usize).max(1))
            .collect();
        let retrieval = match kind {
            DiscriminatorKind::Flatten => clipped(&[5, 6], encoder_layers),
            DiscriminatorKind::Cascade => clipped(&[5], encoder_layers),
        };
        NetConfig {
            input_height,
            input_width,
            input_channels: 3,
            encoder_layers,
            channels_per_layer: channels,
            class_count,
            depth_output_layers: clipped(&[4, 3, 2, 1], encoder_layers),
            triplet_layers: clipped(&[3, 4, 5, 6], encoder_layers),
            retrieval_layers: retrieval,
            discriminator_kind: kind,
            discriminator_layers: (1..=encoder_layers).collect(),
            fd_hidden: default_fd_hidden(),
            cd_final_dim: default_cd_final_dim(),
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let fail = |msg: String| Err(NetError::InvalidConfig(msg));
        if self.input_channels != 3 {
            return fail(format!("input_channels must be 3, got {}", self.input_channels));
        }
        if self.encoder_layers == 0 || self.encoder_layers > 8 {
            return fail(format!(
                "encoder_layers must be in 1..=8, got {}",
                self.encoder_layers
            ));
        }
        let div = 1usize << self.encoder_layers;
        if self.input_height % div != 0 || self.input_width % div != 0 {
            return fail(format!(
                "input {}x{} not divisible by 2^{}",
                self.input_height, self.input_width, self.encoder_layers
            ));
        }
        if self.input_height / div == 0 || self.input_width / div == 0 {
            return fail("deepest level would be empty".into());
        }
        if self.channels_per_layer.len() != self.encoder_layers {
            return fail(format!(
                "channels_per_layer has {} entries for {} layers",
                self.channels_per_layer.len(),
                self.encoder_layers
            ));
        }
        if self.channels_per_layer.iter().any(|&c| c == 0) {
            return fail("zero-width layer".into());
        }
        if self.class_count < 2 {
            return fail(format!("class_count must be >= 2, got {}", self.class_count));
        }
        for (name, layers) in [
            ("depth_output_layers", &self.depth_output_layers),
            ("triplet_layers", &self.triplet_layers),
            ("retrieval_layers", &self.retrieval_layers),
            ("discriminator_layers", &self.discriminator_layers),
        ] {
            if layers.is_empty() {
                return fail(format!("{name} is empty"));
            }
            if let Some(&bad) = layers
                .iter()
                .find(|&&l| l == 0 || l > self.encoder_layers)
            {
                return fail(format!("{name} contains layer {bad} outside 1..={}", self.encoder_layers));
            }
        }
        if self.fd_hidden.0 == 0 || self.fd_hidden.1 == 0 {
            return fail("fd_hidden widths must be positive".into());
        }
        Ok(())
    }

    /// Spatial dimensions of pyramid level `layer` (1-based).
    pub fn level_dims(&self, layer: usize) -> (usize, usize) {
        (
            self.input_height >> layer,
            self.input_width >> layer,
        )
    }

    pub fn channels(&self, layer: usize) -> usize {
        self.channels_per_layer[layer - 1]
    }

    /// Flattened width of the concatenated levels the flatten discriminator
    /// consumes: sum over its layers of channels * height * width.
    pub fn fd_input_dim(&self) -> usize {
        self.discriminator_layers
            .iter()
            .map(|&l| {
                let (h, w) = self.level_dims(l);
                self.channels(l) * h * w
            })
            .sum()
    }

    /// Input/output channel plan of the cascade discriminator's residual
    /// blocks: block `i` maps the running stack at level `i` to the channel
    /// width of level `i + 1`.
    pub fn cascade_plan(&self) -> Vec<(usize, usize)> {
        (1..self.encoder_layers)
            .map(|i| {
                let carried = if i == 1 { 0 } else { self.channels(i) };
                (self.channels(i) + carried, self.channels(i + 1))
            })
            .collect()
    }

    /// Actual flattened width entering the cascade discriminator's final
    /// affine layer for this configuration.
    pub fn cd_flatten_dim(&self) -> usize {
        let deepest = self.encoder_layers;
        let (h, w) = self.level_dims(deepest);
        let c = self.channels(deepest);
        let carried = if deepest == 1 { 0 } else { c };
        (c + carried) * h * w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_clip_to_available_layers() {
        let cfg = NetConfig::toy_default(5, DiscriminatorKind::Flatten);
        assert_eq!(cfg.encoder_layers, 5);
        assert_eq!(cfg.triplet_layers, vec![3, 4, 5]);
        assert_eq!(cfg.retrieval_layers, vec![5]);
        assert_eq!(cfg.depth_output_layers, vec![1, 2, 3, 4]);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_non_divisible_dims() {
        let mut cfg = NetConfig::toy_default(5, DiscriminatorKind::Flatten);
        cfg.input_width = 63;
        assert!(matches!(cfg.validate(), Err(NetError::InvalidConfig(_))));
    }

    #[test]
    fn fd_input_dim_is_definitional_sum() {
        let cfg = NetConfig::toy_default(5, DiscriminatorKind::Flatten);
        let mut expect = 0;
        for l in 1..=5usize {
            let (h, w) = (64 >> l, 64 >> l);
            expect += cfg.channels(l) * h * w;
        }
        assert_eq!(cfg.fd_input_dim(), expect);
        assert_eq!(expect, 16 * 1024 + 32 * 256 + 64 * 64 + 64 * 16 + 128 * 4);
    }

    #[test]
    fn cascade_plan_tracks_channel_widths() {
        let cfg = NetConfig::toy_default(5, DiscriminatorKind::Cascade);
        let plan = cfg.cascade_plan();
        assert_eq!(plan[0], (16, 32));
        assert_eq!(plan[1], (32 + 32, 64));
        assert_eq!(plan[2], (64 + 64, 64));
        assert_eq!(plan[3], (64 + 64, 128));
        assert_eq!(cfg.cd_flatten_dim(), (128 + 128) * 2 * 2);
    }
}
