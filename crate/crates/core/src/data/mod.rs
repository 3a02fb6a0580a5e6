//! CSV ingestion, discretization, one-hot binarization and antecedent mining.

mod dataset;
mod mdlp;
mod mining;
mod table;

use log::info;

use crate::error::Result;

pub use dataset::{binarize, BinaryDataset};
pub use mdlp::{detect_numeric, interval_label, mdlp_cut_points, mdlp_discretize, SplitMap};
pub(crate) use mining::spec_of;
pub use mining::{
    min_support_count, mine_antecedents, Antecedent, AntecedentSet, AntecedentSpec, Literal,
    LiteralSpec, MiningConfig,
};
pub use table::{load_csv, parse_binary, read_csv, RawTable};

/// Output of [`prepare`].
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: BinaryDataset,
    pub antecedents: AntecedentSet,
    pub splits: SplitMap,
}

/// Discretizes `numeric` columns (detected when `None`), binarizes and
/// mines. Without numeric columns every row is kept.
pub fn prepare(
    table: &RawTable,
    numeric: Option<&[String]>,
    mdlp_fraction: f64,
    mining: &MiningConfig,
) -> Result<Prepared> {
    mining.validate()?;
    let numeric = numeric.map_or_else(|| detect_numeric(table), <[String]>::to_vec);
    let (splits, discretized);
    let table = if numeric.is_empty() {
        info!("no numeric columns; all rows kept");
        splits = SplitMap::new();
        table
    } else {
        info!("discretizing {}", numeric.join(", "));
        (splits, discretized) = mdlp_discretize(table, &numeric, mdlp_fraction)?;
        &discretized
    };
    let data = binarize(table)?;
    let antecedents = mine_antecedents(&data, mining)?;
    info!(
        "{} samples, {} features, {} antecedents",
        data.n_samples(),
        data.n_features(),
        antecedents.len()
    );
    Ok(Prepared {
        data,
        antecedents,
        splits,
    })
}
