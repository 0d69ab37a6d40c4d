//! Divide-and-conquer estimation: block partitions, half-block subsample
//! ratios, panel transforms, and median aggregation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{discard_to_multiple, CrossSection, PanelData};
use crate::error::{Error, Result};
use crate::estimators::{gamma_at, partial_out};
use crate::numeric::{mean, median};
use crate::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    Adjacent,
    #[default]
    Random,
}

impl std::str::FromStr for PartitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacent" => Ok(Self::Adjacent),
            "random" => Ok(Self::Random),
            other => Err(Error::Parameter(format!(
                "unknown partition mode `{other}` (expected adjacent or random)"
            ))),
        }
    }
}

/// One block split into the numerator half `r1` and denominator half `r2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub r1: Vec<usize>,
    pub r2: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    pub blocks: Vec<Block>,
    pub mode: PartitionMode,
    /// Rows per block (both halves).
    pub block_size: usize,
}

/// Splits `0..n` into `n_blocks` blocks of equal size, each halved.
pub fn make_partition<R: Rng + ?Sized>(
    n: usize,
    n_blocks: usize,
    mode: PartitionMode,
    rng: &mut R,
) -> Result<BlockPartition> {
    if n_blocks == 0 {
        return Err(Error::Parameter(
            "number of blocks must be at least 1".into(),
        ));
    }
    if n_blocks > n / 2 {
        return Err(Error::TooManyBlocks {
            blocks: n_blocks,
            half: n / 2,
        });
    }
    if !n.is_multiple_of(2 * n_blocks) {
        return Err(Error::Divisibility {
            n,
            two_b: 2 * n_blocks,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    if mode == PartitionMode::Random {
        order.shuffle(rng);
    }
    let b = n / n_blocks;
    let blocks = order
        .chunks(b)
        .map(|c| Block {
            r1: c[..b / 2].to_vec(),
            r2: c[b / 2..].to_vec(),
        })
        .collect();
    Ok(BlockPartition {
        blocks,
        mode,
        block_size: b,
    })
}

/// Blocks-to-block-size ratio `B / b`, which must vanish for consistency.
pub fn block_ratio(n: usize, n_blocks: usize) -> f64 {
    let b = n as f64 / n_blocks as f64;
    n_blocks as f64 / b
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsampleLabel {
    pub year: Option<i64>,
    pub block: usize,
}

/// Label, numerator and denominator of one subsample ratio.
type BlockParts = (SubsampleLabel, f64, f64);

/// Non-degenerate subsample ratios with their labels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SubsampleEstimates {
    pub values: Vec<f64>,
    pub labels: Vec<SubsampleLabel>,
    /// Blocks excluded because their denominator sum was exactly zero.
    pub degenerate: usize,
}

impl SubsampleEstimates {
    fn from_parts(parts: Vec<BlockParts>) -> Result<Self> {
        let total = parts.len();
        let mut out = Self::default();
        for (label, num, den) in parts {
            if den == 0.0 {
                out.degenerate += 1;
            } else {
                out.values.push(num / den);
                out.labels.push(label);
            }
        }
        if out.values.is_empty() {
            return Err(Error::AllBlocksDegenerate(total));
        }
        Ok(out)
    }

    pub fn median(&self) -> f64 {
        median(&self.values).expect("nonempty by construction")
    }
}

/// Numerator `sum_{R1} x y^2` and denominator `sum_{R2} x^2 y` on
/// half-block residualized data.
pub fn subsample_parts(cs: &CrossSection, r1: &[usize], r2: &[usize]) -> Result<(f64, f64)> {
    let r = partial_out(cs, r1, r2)?;
    let num = crate::numeric::sum(r.x_dot.iter().zip(&r.y_dot).map(|(a, b)| a * b * b));
    let den = crate::numeric::sum(r.x_ddot.iter().zip(&r.y_ddot).map(|(a, b)| a * a * b));
    Ok((num, den))
}

pub fn dc_subsample(cs: &CrossSection, r1: &[usize], r2: &[usize]) -> Result<f64> {
    let (num, den) = subsample_parts(cs, r1, r2)?;
    if den == 0.0 {
        return Err(Error::DegenerateBlock { block: 0 });
    }
    Ok(num / den)
}

fn block_parts(
    cs: &CrossSection,
    partition: &BlockPartition,
    year: Option<i64>,
) -> Result<Vec<BlockParts>> {
    partition
        .blocks
        .par_iter()
        .enumerate()
        .map(|(j, blk)| {
            let (num, den) = subsample_parts(cs, &blk.r1, &blk.r2)?;
            Ok((SubsampleLabel { year, block: j }, num, den))
        })
        .collect()
}

/// Median of `n_blocks` subsample ratios on one cross-section.
pub fn dc_estimate<R: Rng + ?Sized>(
    cs: &CrossSection,
    n_blocks: usize,
    mode: PartitionMode,
    rng: &mut R,
) -> Result<(f64, SubsampleEstimates)> {
    let partition = make_partition(cs.n(), n_blocks, mode, rng)?;
    let subs = SubsampleEstimates::from_parts(block_parts(cs, &partition, None)?)?;
    Ok((subs.median(), subs))
}

fn demean_in_place(v: &mut [f64], rows: &[usize]) {
    let vals: Vec<f64> = rows.iter().map(|&i| v[i]).collect();
    let m = mean(&vals);
    for &i in rows {
        v[i] -= m;
    }
}

/// Subtracts firm-specific means from y, x and every control column.
pub fn within_transform(panel: &PanelData) -> PanelData {
    let mut y = panel.y().to_vec();
    let mut x = panel.x().to_vec();
    let mut z = panel.z().clone();
    for range in panel.firm_ranges() {
        let rows: Vec<usize> = range.collect();
        demean_in_place(&mut y, &rows);
        demean_in_place(&mut x, &rows);
        for mut col in z.column_iter_mut() {
            demean_in_place(col.as_mut_slice(), &rows);
        }
    }
    panel.with_values(y, x, z)
}

/// Demeans y, x and the controls within each half-block separately.
/// Rows outside the partition are left unchanged.
pub fn block_demean(cs: &CrossSection, partition: &BlockPartition) -> CrossSection {
    let mut y = cs.y().to_vec();
    let mut x = cs.x().to_vec();
    let mut z = cs.z().clone();
    for blk in &partition.blocks {
        for half in [&blk.r1, &blk.r2] {
            demean_in_place(&mut y, half);
            demean_in_place(&mut x, half);
            for mut col in z.column_iter_mut() {
                demean_in_place(col.as_mut_slice(), half);
            }
        }
    }
    CrossSection::from_parts(y, x, z, cs.z_names().to_vec())
}

/// Full-sample design for the control coefficients of a panel specification:
/// an intercept unless fixed effects are removed, year dummies (first year
/// omitted) when time effects are requested, and the within transform of
/// everything under fixed effects.
pub fn pooled_design(panel: &PanelData, fe: bool, te: bool) -> Result<CrossSection> {
    let years = panel.years();
    let n = panel.n_obs();
    let mut names: Vec<String> = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if !fe {
        names.push("intercept".into());
        cols.push(vec![1.0; n]);
    }
    for (j, name) in panel.z_names().iter().enumerate() {
        names.push(name.clone());
        cols.push(panel.z().column(j).iter().copied().collect());
    }
    if te {
        for &t in years.iter().skip(1) {
            names.push(format!("year_{t}"));
            cols.push(panel.year().iter().map(|&s| f64::from(s == t)).collect());
        }
    }
    let z = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    let expanded = panel.with_values(panel.y().to_vec(), panel.x().to_vec(), z);
    let expanded = if fe {
        within_transform(&expanded)
    } else {
        expanded
    };
    CrossSection::with_names(
        expanded.y().to_vec(),
        expanded.x().to_vec(),
        expanded.z().clone(),
        names,
    )
}

/// Result of the panel divide-and-conquer estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDcFit {
    pub beta: f64,
    pub gamma: nalgebra::DVector<f64>,
    pub subsamples: SubsampleEstimates,
    /// Pooled design on which the control coefficients are evaluated.
    pub design: CrossSection,
    /// Rows discarded per year to reach a multiple of the block size.
    pub discarded: usize,
}

/// Panel estimator: optional within transform, per-year discarding and
/// partitioning into `blocks_per_year` blocks, optional half-block demeaning
/// for time effects, per-half-block partialling out of controls, and the
/// median over all block-year ratios.
///
/// Year `t` (the `t`-th distinct year, zero based) draws its discard and
/// partition randomness from stream `t` of `(seed, "dc.year")`.
pub fn panel_dc_estimate(
    panel: &PanelData,
    blocks_per_year: usize,
    fe: bool,
    te: bool,
    mode: PartitionMode,
    seed: u64,
) -> Result<PanelDcFit> {
    if blocks_per_year == 0 {
        return Err(Error::Parameter(
            "blocks per year must be at least 1".into(),
        ));
    }
    let transformed = if fe {
        within_transform(panel)
    } else {
        panel.clone()
    };
    let years = panel.years();
    let per_year: Vec<(Vec<BlockParts>, usize)> = years
        .par_iter()
        .enumerate()
        .map(|(t, &year)| {
            let mut rng = stream(seed, "dc.year", t as u64);
            let mut cs = transformed.cross_section_at(year)?;
            if !te {
                let z = cs.z().clone().insert_column(0, 1.0);
                let mut names = vec!["intercept".to_string()];
                names.extend(cs.z_names().iter().cloned());
                cs = CrossSection::from_parts(cs.y().to_vec(), cs.x().to_vec(), z, names);
            }
            let n0 = cs.n();
            let cs =
                discard_to_multiple(&cs, 2 * blocks_per_year, &mut rng).map_err(|e| match e {
                    Error::InsufficientData(_) => Error::InsufficientData(format!(
                        "year {year} has {n0} rows, fewer than 2 x {blocks_per_year} blocks"
                    )),
                    other => other,
                })?;
            let partition = make_partition(cs.n(), blocks_per_year, mode, &mut rng)?;
            let cs = if te {
                block_demean(&cs, &partition)
            } else {
                cs
            };
            Ok((block_parts(&cs, &partition, Some(year))?, n0 - cs.n()))
        })
        .collect::<Result<_>>()?;
    let discarded = per_year.iter().map(|(_, d)| d).sum();
    let parts = per_year.into_iter().flat_map(|(p, _)| p).collect();
    let subsamples = SubsampleEstimates::from_parts(parts)?;
    let beta = subsamples.median();
    let design = pooled_design(panel, fe, te)?;
    let gamma = gamma_at(&design, beta)?;
    Ok(PanelDcFit {
        beta,
        gamma,
        subsamples,
        design,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn cs(x: &[f64], y: &[f64]) -> CrossSection {
        CrossSection::without_controls(y.to_vec(), x.to_vec()).unwrap()
    }

    #[test]
    fn adjacent_partition_layout() {
        let mut rng = stream(0, "t", 0);
        let p = make_partition(8, 2, PartitionMode::Adjacent, &mut rng).unwrap();
        assert_eq!(
            p.blocks[0],
            Block {
                r1: vec![0, 1],
                r2: vec![2, 3]
            }
        );
        assert_eq!(
            p.blocks[1],
            Block {
                r1: vec![4, 5],
                r2: vec![6, 7]
            }
        );
        assert_eq!(p.block_size, 4);
    }

    #[test]
    fn partition_errors() {
        let mut rng = stream(0, "t", 0);
        assert!(matches!(
            make_partition(10, 2, PartitionMode::Random, &mut rng),
            Err(Error::Divisibility { n: 10, two_b: 4 })
        ));
        assert!(matches!(
            make_partition(4, 3, PartitionMode::Random, &mut rng),
            Err(Error::TooManyBlocks { .. })
        ));
        assert!(make_partition(4, 0, PartitionMode::Random, &mut rng).is_err());
    }

    #[test]
    fn block_ratio_at_sixty_thousand() {
        assert!((block_ratio(60_000, 20) - 20.0 / 3000.0).abs() < 1e-15);
        assert!((block_ratio(60_000, 20) - 0.0066).abs() < 1e-4);
    }

    #[test]
    fn subsample_hand_values() {
        let c = cs(&[1.0, 2.0, 1.0, -1.0], &[1.0, 3.0, 2.0, 1.0]);
        let (num, den) = subsample_parts(&c, &[0, 1], &[2, 3]).unwrap();
        assert_eq!((num, den), (19.0, 3.0));
        assert_relative_eq!(dc_subsample(&c, &[0, 1], &[2, 3]).unwrap(), 19.0 / 3.0);
        // identical x in both halves and y = 2x
        let c = cs(&[1.0, 3.0, 1.0, 3.0], &[2.0, 6.0, 2.0, 6.0]);
        assert_relative_eq!(dc_subsample(&c, &[0, 1], &[2, 3]).unwrap(), 2.0);
    }

    #[test]
    fn degenerate_blocks_are_excluded() {
        // block 0 has zero denominator, block 1 does not
        let c = cs(
            &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            &[1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0, 1.0],
        );
        let mut rng = stream(0, "t", 0);
        let (b, subs) = dc_estimate(&c, 2, PartitionMode::Adjacent, &mut rng).unwrap();
        assert_eq!(subs.degenerate, 1);
        assert_eq!(subs.values, vec![1.0]);
        assert_eq!(b, 1.0);
        assert!(matches!(
            dc_subsample(&c, &[0, 1], &[2, 3]),
            Err(Error::DegenerateBlock { .. })
        ));
        let all = cs(&[1.0, 1.0, 1.0, 1.0], &[1.0, 1.0, 1.0, -1.0]);
        assert!(matches!(
            dc_estimate(&all, 1, PartitionMode::Adjacent, &mut rng),
            Err(Error::AllBlocksDegenerate(1))
        ));
    }

    #[test]
    fn single_block_equals_subsample() {
        let mut rng = stream(3, "data", 0);
        let x: Vec<f64> = (0..20).map(|_| rng.random::<f64>().powi(3)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.random::<f64>()).collect();
        let c = cs(&x, &y);
        let (b, subs) = dc_estimate(&c, 1, PartitionMode::Adjacent, &mut rng).unwrap();
        let r1: Vec<usize> = (0..10).collect();
        let r2: Vec<usize> = (10..20).collect();
        assert_eq!(subs.values.len(), 1);
        assert_eq!(b, dc_subsample(&c, &r1, &r2).unwrap());
    }

    #[test]
    fn median_resists_a_wild_ratio() {
        assert_eq!(median(&[1.0, 5.0, 100.0]), Some(5.0));
    }

    #[test]
    fn within_transform_examples() {
        let p = PanelData::new(
            vec![1, 1, 2, 2, 2],
            vec![1, 2, 1, 2, 3],
            vec![1.0, 3.0, 4.0, 4.0, 4.0],
            vec![0.0, 1.0, 2.0, 3.0, 7.0],
            DMatrix::zeros(5, 0),
            vec![],
        )
        .unwrap();
        let w = within_transform(&p);
        assert_eq!(w.y(), &[-1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(w.x(), &[-0.5, 0.5, -2.0, -1.0, 3.0]);
    }

    #[test]
    fn block_demean_examples() {
        let c = cs(&[1.0, 1.0, 2.0, 2.0], &[1.0, 3.0, 10.0, 20.0]);
        let p = BlockPartition {
            blocks: vec![Block {
                r1: vec![0, 1],
                r2: vec![2, 3],
            }],
            mode: PartitionMode::Adjacent,
            block_size: 4,
        };
        let d = block_demean(&c, &p);
        assert_eq!(d.y(), &[-1.0, 1.0, -5.0, 5.0]);
        assert_eq!(d.x(), &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(block_demean(&d, &p), d);
    }

    fn toy_panel(seed: u64, firms: usize, years: usize) -> PanelData {
        let mut rng = stream(seed, "panel", 0);
        let mut f = Vec::new();
        let mut t = Vec::new();
        let mut y = Vec::new();
        let mut x = Vec::new();
        let mut z = Vec::new();
        for i in 0..firms {
            let a: f64 = rng.random::<f64>() * 2.0;
            for s in 0..years {
                let xi = rng.random::<f64>().powi(3) * 3.0 + a;
                let zi: f64 = rng.random();
                f.push(i as i64 + 1);
                t.push(2000 + s as i64);
                x.push(xi + 0.3 * (rng.random::<f64>() - 0.5));
                y.push(0.4 * xi + 0.2 * zi + a + 0.1 * s as f64 + 0.05 * rng.random::<f64>());
                z.push(zi);
            }
        }
        let n = f.len();
        PanelData::new(f, t, y, x, DMatrix::from_vec(n, 1, z), vec!["z".into()]).unwrap()
    }

    #[test]
    fn within_then_ols_matches_dummy_regression() {
        let p = toy_panel(4, 5, 4);
        let w = within_transform(&p);
        let fw = crate::estimators::ols(&w.pooled()).unwrap();
        // explicit firm dummies
        let ranges = p.firm_ranges();
        let n = p.n_obs();
        let mut z = DMatrix::zeros(n, 1 + ranges.len());
        for i in 0..n {
            z[(i, 0)] = p.z()[(i, 0)];
        }
        for (j, r) in ranges.iter().enumerate() {
            for i in r.clone() {
                z[(i, j + 1)] = 1.0;
            }
        }
        let full = CrossSection::new(p.y().to_vec(), p.x().to_vec(), z).unwrap();
        let fd = crate::estimators::ols(&full).unwrap();
        assert_relative_eq!(fw.0, fd.0, max_relative = 1e-10);
        assert_relative_eq!(fw.1[0], fd.1[0], max_relative = 1e-10);
        for r in ranges {
            let m: f64 = r.clone().map(|i| w.x()[i]).sum::<f64>() / r.len() as f64;
            assert!(m.abs() < 1e-12);
        }
    }

    #[test]
    fn single_year_panel_reduces_to_cross_section() {
        let p2 = toy_panel(6, 40, 2);
        // Reduction checked on the first year of a two-year panel.
        let fit = panel_dc_estimate(&p2, 4, false, false, PartitionMode::Random, 9).unwrap();
        let cs = p2.cross_section_at(2000).unwrap().with_intercept().unwrap();
        let mut rng = stream(9, "dc.year", 0);
        let cs = discard_to_multiple(&cs, 8, &mut rng).unwrap();
        let (_, subs) = dc_estimate(&cs, 4, PartitionMode::Random, &mut rng).unwrap();
        let first: Vec<f64> = fit
            .subsamples
            .values
            .iter()
            .zip(&fit.subsamples.labels)
            .filter(|(_, l)| l.year == Some(2000))
            .map(|(v, _)| *v)
            .collect();
        assert_eq!(first, subs.values);
    }

    #[test]
    fn panel_year_too_small_names_year() {
        let p = toy_panel(7, 5, 3);
        match panel_dc_estimate(&p, 4, true, false, PartitionMode::Random, 1) {
            Err(Error::InsufficientData(m)) => assert!(m.contains("year 2000"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn panel_specs_run_and_are_deterministic() {
        let p = toy_panel(8, 48, 4);
        for (fe, te) in [(false, false), (true, false), (false, true), (true, true)] {
            let a = panel_dc_estimate(&p, 3, fe, te, PartitionMode::Random, 5).unwrap();
            let b = panel_dc_estimate(&p, 3, fe, te, PartitionMode::Random, 5).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.subsamples.values.len(), 12);
            assert_eq!(a.beta, a.subsamples.median());
            let z = a.design.z_names().iter().position(|s| s == "z").unwrap();
            assert!(a.gamma[z].is_finite());
        }
    }

    proptest! {
        #[test]
        fn partition_invariants(half in 1usize..40, blocks in 1usize..12, seed in any::<u64>(), adjacent in any::<bool>()) {
            let n = 2 * blocks * half;
            let mode = if adjacent { PartitionMode::Adjacent } else { PartitionMode::Random };
            let mut rng = stream(seed, "p", 0);
            let p = make_partition(n, blocks, mode, &mut rng).unwrap();
            prop_assert_eq!(p.blocks.len(), blocks);
            let mut seen = vec![false; n];
            for blk in &p.blocks {
                prop_assert_eq!(blk.r1.len(), half);
                prop_assert_eq!(blk.r2.len(), half);
                for &i in blk.r1.iter().chain(&blk.r2) {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
        }

        #[test]
        fn median_is_block_order_invariant(mut v in proptest::collection::vec(-1e3f64..1e3, 1..50), seed in any::<u64>()) {
            let m = median(&v).unwrap();
            v.shuffle(&mut stream(seed, "s", 0));
            prop_assert_eq!(median(&v).unwrap(), m);
        }
    }
}
