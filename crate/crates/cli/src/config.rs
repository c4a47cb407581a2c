//! `--config` parsing: a JSON file path or inline `key=value` pairs.

use std::path::Path;

use brixkit::{ColorSpace, CrossMode, Error, FeatureConfig, Resolution, Result};

fn base() -> FeatureConfig {
    FeatureConfig {
        n_bin_x: 16,
        n_bin_y: 8,
        cross: CrossMode::None,
        space: ColorSpace::Hsv,
        resolution: Resolution::Low,
    }
}

fn parse_inline(spec: &str) -> Result<FeatureConfig> {
    let mut cfg = base();
    for pair in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got `{pair}`")))?;
        let count = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidConfig(format!("`{v}` is not a bin count")))
        };
        match key.trim() {
            "nx" | "n_bin_x" => cfg.n_bin_x = count(value)?,
            "ny" | "n_bin_y" => cfg.n_bin_y = count(value)?,
            "cross" => cfg.cross = value.trim().parse()?,
            "space" | "color_space" => cfg.space = value.trim().parse()?,
            "res" | "resolution" => cfg.resolution = value.trim().parse()?,
            other => return Err(Error::InvalidConfig(format!("unknown config key `{other}`"))),
        }
    }
    Ok(cfg)
}

pub fn parse_feature_config(spec: &str) -> Result<FeatureConfig> {
    let cfg = if Path::new(spec).is_file() {
        let text = std::fs::read_to_string(spec).map_err(|e| Error::Io {
            path: spec.into(),
            source: e,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{spec}: {e}")))?
    } else {
        parse_inline(spec)?
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_configs() {
        let c = parse_feature_config("nx=8, ny=16, cross=thin, space=lab, res=med").unwrap();
        assert_eq!((c.n_bin_x, c.n_bin_y), (8, 16));
        assert_eq!(c.cross, CrossMode::Thin);
        assert_eq!(c.space, ColorSpace::Lab);
        assert_eq!(c.resolution, Resolution::Med);
        assert_eq!(parse_feature_config("space=rgb").unwrap().n_bin_x, 16);
    }

    #[test]
    fn bad_configs_are_usage_errors() {
        for spec in ["nx", "nx=zero", "depth=3", "cross=wide", "nx=2,cross=fat"] {
            let err = parse_feature_config(spec).unwrap_err();
            assert_eq!(err.kind(), brixkit::ErrorKind::Usage, "{spec}");
        }
    }
}
