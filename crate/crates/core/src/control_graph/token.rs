//! Mu-law companding and uniform binning for the tokenized control graph.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

use super::graph::ControlGraph;

pub const MU: f64 = 100.0;
pub const MU_LAW_M: f64 = 256.0;
pub const N_BINS: usize = 1024;

/// `sgn(x) * ln(|x| mu + 1) / ln(M mu + 1)`, with `|x|` clamped to `M`.
pub fn mu_law<T: Real>(x: T) -> T {
    let mu = T::lit(MU);
    let m = T::lit(MU_LAW_M);
    let a = x.abs().min(m);
    if a == m {
        return T::one().copysign(x);
    }
    let y = (a * mu).ln_1p() / (m * mu).ln_1p();
    if x < T::zero() {
        -y
    } else {
        y
    }
}

pub fn mu_law_inverse<T: Real>(y: T) -> T {
    let mu = T::lit(MU);
    let m = T::lit(MU_LAW_M);
    let a = y.abs().min(T::one());
    let x = (a * (m * mu).ln_1p()).exp_m1() / mu;
    if y < T::zero() {
        -x
    } else {
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dequantize {
    Center,
    /// Mean of the centers of bins `k-1, k, k+1`, clipped to valid indices.
    AverageWindow,
}

/// Bin `k` covers `[-1 + 2k/n, -1 + 2(k+1)/n)`; `1.0` lands in the last bin.
pub fn quantize<T: Real>(y: T, n_bins: usize) -> usize {
    let y = y.max(-T::one()).min(T::one());
    let k = ((y + T::one()) * T::count(n_bins) / T::lit(2.0)).floor();
    k.to_usize().unwrap_or(0).min(n_bins - 1)
}

pub fn bin_center<T: Real>(k: usize, n_bins: usize) -> T {
    -T::one() + T::count(2 * k + 1) / T::count(n_bins)
}

pub fn dequantize<T: Real>(bin: usize, n_bins: usize, mode: Dequantize) -> Result<T> {
    if n_bins < 2 {
        return Err(Error::Value(format!("need at least 2 bins, got {n_bins}")));
    }
    if bin >= n_bins {
        return Err(Error::Index(format!("bin {bin} out of range for {n_bins} bins")));
    }
    Ok(match mode {
        Dequantize::Center => bin_center(bin, n_bins),
        Dequantize::AverageWindow => {
            let lo = bin.saturating_sub(1);
            let hi = (bin + 1).min(n_bins - 1);
            let sum = (lo..=hi).fold(T::zero(), |acc, k| acc + bin_center::<T>(k, n_bins));
            sum / T::count(hi - lo + 1)
        }
    })
}

/// Token for a raw value: mu-law, then binning.
pub fn tokenize_value(x: f64) -> usize {
    quantize(mu_law(x), N_BINS)
}

/// Value represented by a token under the given dequantization.
pub fn detokenize_value<T: Real>(token: usize, mode: Dequantize) -> Result<T> {
    Ok(mu_law_inverse(dequantize::<T>(token, N_BINS, mode)?))
}

/// Element-wise token grid of a graph's node features. Indicator columns
/// go through the same map, so 0 and 1 become their own bins.
pub fn tokenize_cg(cg: &ControlGraph) -> Result<Vec<usize>> {
    let f = &cg.node_features;
    if let Some(i) = f.data().iter().position(|v| !v.is_finite()) {
        return Err(Error::Value(format!(
            "non-finite feature at row {}, column {}",
            i / f.cols(),
            i % f.cols()
        )));
    }
    Ok(f.data().iter().map(|&x| tokenize_value(x)).collect())
}

pub fn detokenize(tokens: &[usize], rows: usize, cols: usize, mode: Dequantize) -> Result<Tensor> {
    if tokens.len() != rows * cols {
        return Err(Error::Shape(format!("{} tokens for a {rows}x{cols} grid", tokens.len())));
    }
    let data = tokens.iter().map(|&t| detokenize_value::<f64>(t, mode)).collect::<Result<Vec<_>>>()?;
    Ok(Tensor::matrix(rows, cols, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_law_endpoints() {
        assert_eq!(mu_law(0.0f64), 0.0);
        assert_eq!(mu_law(256.0f64), 1.0);
        assert_eq!(mu_law(-256.0f64), -1.0);
        assert_eq!(mu_law(1e6f64), 1.0);
        assert!((mu_law(1.0f32) - mu_law(1.0f64) as f32).abs() < 1e-6);
    }

    #[test]
    fn mu_law_round_trip() {
        for i in -1000..=1000 {
            let x = i as f64 * 0.256;
            assert!((mu_law_inverse(mu_law(x)) - x).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn quantize_boundaries() {
        assert_eq!(quantize(-1.0f64, N_BINS), 0);
        assert_eq!(quantize(1.0f64, N_BINS), 1023);
        assert_eq!(quantize(0.0f64, N_BINS), 512);
        assert_eq!(dequantize::<f64>(512, N_BINS, Dequantize::Center).unwrap(), 0.0009765625);
        assert!(matches!(dequantize::<f64>(1024, N_BINS, Dequantize::Center), Err(Error::Index(_))));
    }

    #[test]
    fn average_window_edges() {
        let c0: f64 = bin_center(0, N_BINS);
        let c1: f64 = bin_center(1, N_BINS);
        assert_eq!(dequantize::<f64>(0, N_BINS, Dequantize::AverageWindow).unwrap(), (c0 + c1) / 2.0);
        let k = 300;
        let a: f64 = dequantize(k, N_BINS, Dequantize::AverageWindow).unwrap();
        assert!((a - bin_center::<f64>(k, N_BINS)).abs() < 1e-15);
    }

    #[test]
    fn zero_grid_is_512() {
        use crate::control_graph::build_cg_v1;
        let g = crate::morphology::generate_morphology(crate::morphology::Blueprint::Ant, 4, None).unwrap();
        let cg = build_cg_v1(&Tensor::zeros(&[9, 30]), &[], &g).unwrap();
        let mut cg = cg;
        cg.node_features.data_mut().iter_mut().for_each(|v| *v = 0.0);
        let t = tokenize_cg(&cg).unwrap();
        assert!(t.iter().all(|&k| k == 512));
        cg.node_features.data_mut()[3] = f64::NAN;
        assert!(matches!(tokenize_cg(&cg), Err(Error::Value(_))));
    }
}
