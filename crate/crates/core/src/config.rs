//! Plain-text (TOML) description of a source/channel/distortion setup.
//!
//! ```toml
//! alphabet_x = 2
//! alphabet_y = 2
//! alphabet_xhat = 2
//! channel = [[0.9, 0.1], [0.1, 0.9]]
//! distortion = [[0.0, 1.0], [1.0, 0.0]]   # optional, Hamming by default
//! sequence = "0110100110010110"          # or a list of integers
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_dmc, Channel, DistortionMatrix, Sequence};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SequenceSpec {
    Digits(String),
    Symbols(Vec<usize>),
}

/// The raw document, field names as they appear on disk.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub alphabet_x: Option<usize>,
    pub alphabet_y: Option<usize>,
    pub alphabet_xhat: Option<usize>,
    pub channel: Option<Vec<Vec<f64>>>,
    pub distortion: Option<Vec<Vec<f64>>>,
    pub sequence: Option<SequenceSpec>,
}

/// A validated setup.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub alpha: usize,
    pub beta: usize,
    pub gamma: usize,
    pub channel: Channel,
    pub distortion: DistortionMatrix,
    pub sequence: Option<Sequence>,
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn into_model(self) -> Result<Model> {
        let rows = self
            .channel
            .ok_or_else(|| Error::Config("missing field `channel`".into()))?;
        let channel = validate_dmc(&rows).map_err(|e| Error::Config(format!("channel: {e}")))?;
        let alpha = self.alphabet_x.unwrap_or(channel.inputs());
        let beta = self.alphabet_y.unwrap_or(channel.outputs());
        if alpha != channel.inputs() || beta != channel.outputs() {
            return Err(Error::Config(format!(
                "channel is {}x{} but alphabets are {alpha}x{beta}",
                channel.inputs(),
                channel.outputs()
            )));
        }
        let distortion = match self.distortion {
            Some(rows) => DistortionMatrix::new(&rows)
                .map_err(|e| Error::Config(format!("distortion: {e}")))?,
            None => DistortionMatrix::hamming(alpha.max(self.alphabet_xhat.unwrap_or(alpha))),
        };
        let gamma = self.alphabet_xhat.unwrap_or(distortion.recon_size());
        if distortion.source_size() != alpha || distortion.recon_size() != gamma {
            return Err(Error::Config(format!(
                "distortion is {}x{} but alphabets are {alpha}x{gamma}",
                distortion.source_size(),
                distortion.recon_size()
            )));
        }
        let sequence = match self.sequence {
            None => None,
            Some(SequenceSpec::Digits(s)) => Some(Sequence::from_digits(alpha, &s)),
            Some(SequenceSpec::Symbols(v)) => Some(Sequence::new(alpha, v)),
        }
        .transpose()
        .map_err(|e| Error::Config(format!("sequence: {e}")))?;
        Ok(Model {
            alpha,
            beta,
            gamma,
            channel,
            distortion,
            sequence,
        })
    }
}

impl Model {
    pub fn from_toml(text: &str) -> Result<Self> {
        ModelDocument::parse(text)?.into_model()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_document() {
        let m = Model::from_toml(
            "alphabet_x = 2\nalphabet_y = 2\nalphabet_xhat = 2\n\
             channel = [[0.9, 0.1], [0.1, 0.9]]\n\
             distortion = [[0.0, 1.0], [1.0, 0.0]]\n\
             sequence = [0, 1, 1, 0]\n",
        )
        .unwrap();
        assert_eq!((m.alpha, m.beta, m.gamma), (2, 2, 2));
        assert_eq!(m.sequence.unwrap().symbols(), &[0, 1, 1, 0]);
        assert_eq!(m.channel.prob(0, 1), 0.1);
    }

    #[test]
    fn digits_and_default_distortion() {
        let m =
            Model::from_toml("channel = [[1.0, 0.0], [0.0, 1.0]]\nsequence = \"0011\"\n").unwrap();
        assert_eq!(m.distortion, DistortionMatrix::hamming(2));
        assert_eq!(m.sequence.unwrap().to_digits(), "0011");
    }

    #[test]
    fn missing_channel_is_config_error() {
        let err = Model::from_toml("alphabet_x = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("channel")));
    }

    #[test]
    fn inconsistent_alphabets_rejected() {
        let err =
            Model::from_toml("alphabet_x = 3\nchannel = [[1.0, 0.0], [0.0, 1.0]]\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = Model::from_toml("channel = [[0.5, 0.4], [0.0, 1.0]]\n").unwrap_err();
        assert!(matches!(err, Error::Config(ref s) if s.contains("sums")));
    }
}
