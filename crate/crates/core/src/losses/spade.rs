use crate::error::{Error, Result};

/// Dense `height x width x channels` feature map, channel-last.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::InvalidArgument(format!(
                "feature map data length {} != {height}x{width}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, channels: usize, v: f64) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![v; height * width * channels],
        }
    }

    fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}

/// Spatially adaptive modulation `gamma * features + beta`, elementwise.
pub fn spade_modulate(
    features: &FeatureMap,
    gamma: &FeatureMap,
    beta: &FeatureMap,
) -> Result<FeatureMap> {
    for (name, m) in [("gamma", gamma), ("beta", beta)] {
        if m.shape() != features.shape() {
            return Err(Error::ShapeMismatch {
                left: format!("features {:?}", features.shape()),
                right: format!("{name} {:?}", m.shape()),
            });
        }
    }
    let data = features
        .data
        .iter()
        .zip(&gamma.data)
        .zip(&beta.data)
        .map(|((&f, &g), &b)| g * f + b)
        .collect();
    FeatureMap::new(features.height, features.width, features.channels, data)
}
