//! Quantile binning of training features.

/// Cut points for one feature. Bin `b` holds values `x` with
/// `cuts[b-1] < x <= cuts[b]`; the last cut is the training maximum.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FeatureCuts {
    pub cuts: Vec<f64>,
}

impl FeatureCuts {
    pub fn from_values(values: &[f64], max_bins: usize) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut distinct = sorted.clone();
        distinct.dedup();
        if distinct.len() <= max_bins {
            return FeatureCuts { cuts: distinct };
        }
        let n = sorted.len();
        let mut cuts: Vec<f64> = (1..max_bins).map(|b| sorted[(b * n) / max_bins - 1]).collect();
        cuts.push(sorted[n - 1]);
        cuts.dedup();
        FeatureCuts { cuts }
    }

    #[inline]
    pub fn bin(&self, x: f64) -> u16 {
        let b = self.cuts.partition_point(|&c| c < x);
        b.min(self.cuts.len() - 1) as u16
    }

    pub fn num_bins(&self) -> usize {
        self.cuts.len()
    }
}

/// Column-major binned copy of a row-major feature matrix.
#[derive(Debug, Clone)]
pub(crate) struct BinnedMatrix {
    pub cuts: Vec<FeatureCuts>,
    /// `columns[j][row]` is the bin of feature `j` for `row`.
    pub columns: Vec<Vec<u16>>,
}

impl BinnedMatrix {
    pub fn build(rows: &[f64], num_features: usize, max_bins: usize) -> Self {
        let num_rows = rows.len() / num_features;
        let (cuts, columns) = (0..num_features)
            .map(|j| {
                let col: Vec<f64> = (0..num_rows).map(|i| rows[i * num_features + j]).collect();
                let cuts = FeatureCuts::from_values(&col, max_bins);
                let bins = col.iter().map(|&x| cuts.bin(x)).collect();
                (cuts, bins)
            })
            .unzip();
        BinnedMatrix { cuts, columns }
    }
}
