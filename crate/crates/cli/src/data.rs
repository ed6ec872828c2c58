//! Materialising configured datasets.

use std::collections::HashMap;

use selreg::dataset::{load_csv, synth_heteroscedastic, synth_house_prices, ColumnKind, RawDataset};

use crate::config::DatasetConfig;

pub fn load(config: &DatasetConfig) -> selreg::Result<RawDataset> {
    match config {
        DatasetConfig::Synthetic { n, d, noise, seed, .. } => {
            let data = synth_heteroscedastic(*n, *d, *noise, *seed).dataset;
            Ok(RawDataset::from_numeric(&data.features, &data.feature_names(), data.target, &data.target_name))
        }
        DatasetConfig::HousePrices { n, seed, .. } => Ok(synth_house_prices(*n, *seed)),
        DatasetConfig::Csv { path, target, categorical, .. } => {
            let kinds: HashMap<String, ColumnKind> =
                categorical.iter().map(|c| (c.clone(), ColumnKind::Categorical)).collect();
            load_csv(path, target, (!kinds.is_empty()).then_some(&kinds))
        }
    }
}
