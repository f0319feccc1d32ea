//! Random inputs and the jump-adapted time partition.
//!
//! Every path draws its Poisson jump times and its Wiener increments from two
//! independent counter-based streams derived from `(master_seed, path_index)`.
//! Wiener increments are generated once on the finest grid of a study and
//! summed onto coarser grids, so all resolutions see the same Brownian path
//! and the same jumps.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use thiserror::Error;

use crate::model::{integer_ratio, ModelSpec};

/// Random stream handed out per path and purpose.
pub type PathRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("jump times must be strictly increasing (index {index})")]
    UnsortedJumps { index: usize },
    #[error("jump time {time} lies outside (0, {horizon}]")]
    JumpOutOfRange { time: f64, horizon: f64 },
    #[error("horizon {horizon} is not an integer multiple of tau {tau}")]
    HorizonNotMultiple { horizon: f64, tau: f64 },
    #[error("grid resolution l = {l} must be at least 2")]
    TooCoarse { l: u64 },
    #[error("grid with l = {coarse} is not refined by the noise grid with l = {fine}")]
    IncompatibleResolution { coarse: u64, fine: u64 },
    #[error("grid jump nodes do not match the noise jump times")]
    MismatchedJumps,
    #[error("grids cover different intervals")]
    MismatchedDomain,
}

/// What a stream is used for. Each purpose gets its own stream per path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Wiener = 0,
    Poisson = 1,
}

/// Derives the stream for `(path_index, purpose)` under `master_seed`.
///
/// The ChaCha key comes from the seed and the 64-bit stream id is
/// `2 * path_index + purpose`, so distinct pairs never share a keystream
/// for `path_index < 2^63`.
pub fn derive_path_stream(master_seed: u64, path_index: u64, purpose: Purpose) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((path_index << 1) | purpose as u64);
    rng
}

/// Event times of a homogeneous Poisson process with intensity `lambda` on
/// `(0, horizon]`, built from cumulative exponential inter-arrival times.
pub fn sample_jump_times<R: Rng + ?Sized>(lambda: f64, horizon: f64, rng: &mut R) -> Vec<f64> {
    let mut times = Vec::new();
    if lambda.is_nan() || lambda <= 0.0 {
        return times;
    }
    let exp = Exp::new(lambda).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t > horizon {
            break;
        }
        // An exponential draw of exactly zero would duplicate a time.
        if times.last().is_some_and(|&prev| t <= prev) || t <= 0.0 {
            continue;
        }
        times.push(t);
    }
    times
}

/// Role of a grid node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// Multiple `n * tau / l` of the base step.
    Deterministic(i64),
    /// The `j`-th jump time.
    Jump(u32),
    /// A jump time that coincides with a deterministic node.
    Merged(i64, u32),
}

impl NodeKind {
    pub fn det_index(self) -> Option<i64> {
        match self {
            NodeKind::Deterministic(n) | NodeKind::Merged(n, _) => Some(n),
            NodeKind::Jump(_) => None,
        }
    }

    pub fn jump_index(self) -> Option<u32> {
        match self {
            NodeKind::Jump(j) | NodeKind::Merged(_, j) => Some(j),
            NodeKind::Deterministic(_) => None,
        }
    }

    pub fn is_jump(self) -> bool {
        self.jump_index().is_some()
    }
}

/// Time partition of `[-tau, T]`: `l + 1` equidistant nodes on `[-tau, 0]`,
/// then every multiple of `tau / l` on `[0, T]` merged with the jump times.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpAdaptedGrid {
    nodes: Vec<f64>,
    kinds: Vec<NodeKind>,
    /// Absolute node position of deterministic node `n`, stored at `n + l`.
    det_pos: Vec<usize>,
    tau: f64,
    horizon: f64,
    l: u64,
}

/// Absolute tolerance (relative to `T`) under which a jump time is merged
/// into a deterministic node.
pub const MERGE_TOLERANCE: f64 = 1e-15;

impl JumpAdaptedGrid {
    /// Superposes `jump_times` onto the equidistant grid with step `tau / l`.
    pub fn build(tau: f64, horizon: f64, l: u64, jump_times: &[f64]) -> Result<Self, NoiseError> {
        if l < 2 {
            return Err(NoiseError::TooCoarse { l });
        }
        let periods = integer_ratio(horizon, tau)
            .filter(|&n| n >= 1)
            .ok_or(NoiseError::HorizonNotMultiple { horizon, tau })?;
        for (i, &t) in jump_times.iter().enumerate() {
            if !(t > 0.0 && t <= horizon) {
                return Err(NoiseError::JumpOutOfRange { time: t, horizon });
            }
            if i > 0 && t <= jump_times[i - 1] {
                return Err(NoiseError::UnsortedJumps { index: i });
            }
        }

        let l_i = l as i64;
        let steps = (periods * l) as i64;
        let det_time = |n: i64| n as f64 * tau / l as f64;
        let tol = MERGE_TOLERANCE * horizon;

        let capacity = (l_i + steps + 1) as usize + jump_times.len();
        let mut nodes = Vec::with_capacity(capacity);
        let mut kinds = Vec::with_capacity(capacity);
        let mut det_pos = Vec::with_capacity((l_i + steps + 1) as usize);

        for n in -l_i..0 {
            det_pos.push(nodes.len());
            nodes.push(det_time(n));
            kinds.push(NodeKind::Deterministic(n));
        }
        let mut n = 0i64;
        let mut j = 0usize;
        while n <= steps {
            let td = if n == steps { horizon } else { det_time(n) };
            match jump_times.get(j) {
                Some(&tj) if libm::fabs(tj - td) <= tol => {
                    det_pos.push(nodes.len());
                    nodes.push(td);
                    kinds.push(NodeKind::Merged(n, j as u32));
                    n += 1;
                    j += 1;
                }
                Some(&tj) if tj < td => {
                    nodes.push(tj);
                    kinds.push(NodeKind::Jump(j as u32));
                    j += 1;
                }
                _ => {
                    det_pos.push(nodes.len());
                    nodes.push(td);
                    kinds.push(NodeKind::Deterministic(n));
                    n += 1;
                }
            }
        }
        debug_assert_eq!(j, jump_times.len());

        Ok(Self {
            nodes,
            kinds,
            det_pos,
            tau,
            horizon,
            l,
        })
    }

    /// All node times on `[-tau, T]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Position of `t = 0`.
    pub fn zero_index(&self) -> usize {
        self.l as usize
    }

    /// Number of intervals on `[0, T]`.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1 - self.zero_index()
    }

    /// Nodes on `[0, T]`.
    pub fn forward_nodes(&self) -> &[f64] {
        &self.nodes[self.zero_index()..]
    }

    pub fn is_jump(&self, k: usize) -> bool {
        self.kinds[k].is_jump()
    }

    pub fn kind(&self, k: usize) -> NodeKind {
        self.kinds[k]
    }

    /// Absolute position of deterministic node `n` (`-l <= n <= N`).
    pub fn det_position(&self, n: i64) -> usize {
        self.det_pos[(n + self.l as i64) as usize]
    }

    /// Number of deterministic nodes on `[0, T]`.
    pub fn det_count(&self) -> usize {
        self.det_pos.len() - self.l as usize
    }

    pub fn jump_count(&self) -> usize {
        self.kinds.iter().filter(|k| k.is_jump()).count()
    }

    pub fn l(&self) -> u64 {
        self.l
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Base step `tau / l`; no interval is longer.
    pub fn max_step(&self) -> f64 {
        self.tau / self.l as f64
    }

    /// Absolute positions in `fine` of this grid's nodes on `[0, T]`.
    ///
    /// Nodes are matched by identity (deterministic index scaled by the
    /// refinement ratio, or jump index), never by comparing times.
    pub fn embed_in(&self, fine: &JumpAdaptedGrid) -> Result<Vec<usize>, NoiseError> {
        if !fine.l.is_multiple_of(self.l) {
            return Err(NoiseError::IncompatibleResolution {
                coarse: self.l,
                fine: fine.l,
            });
        }
        if self.tau != fine.tau || self.horizon != fine.horizon {
            return Err(NoiseError::MismatchedDomain);
        }
        let ratio = (fine.l / self.l) as i64;
        let mut out = Vec::with_capacity(self.intervals() + 1);
        let mut p = fine.zero_index();
        for &kind in &self.kinds[self.zero_index()..] {
            let target_det = kind.det_index().map(|n| n * ratio);
            let target_jump = kind.jump_index();
            loop {
                let Some(&fk) = fine.kinds.get(p) else {
                    return Err(NoiseError::MismatchedJumps);
                };
                let det_hit = target_det.is_some() && fk.det_index() == target_det;
                let jump_hit = target_jump.is_some() && fk.jump_index() == target_jump;
                if det_hit || jump_hit {
                    if target_jump.is_some() != fk.is_jump() && !det_hit {
                        return Err(NoiseError::MismatchedJumps);
                    }
                    break;
                }
                p += 1;
            }
            out.push(p);
        }
        if self.jump_count() != fine.jump_count() {
            return Err(NoiseError::MismatchedJumps);
        }
        Ok(out)
    }
}

/// Random inputs for one Monte Carlo path: the jump times and the Wiener
/// increments on the finest grid the path will be simulated on.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    master_seed: u64,
    path_index: u64,
    jump_times: Vec<f64>,
    fine_grid: JumpAdaptedGrid,
    wiener_fine: Vec<f64>,
}

impl NoiseBundle {
    /// Draws the bundle for `path_index`. A pure function of its arguments.
    pub fn generate(
        model: &ModelSpec,
        fine_l: u64,
        master_seed: u64,
        path_index: u64,
    ) -> Result<Self, NoiseError> {
        let mut poisson = derive_path_stream(master_seed, path_index, Purpose::Poisson);
        let jump_times = sample_jump_times(model.lambda(), model.horizon(), &mut poisson);
        let fine_grid = JumpAdaptedGrid::build(model.tau(), model.horizon(), fine_l, &jump_times)?;

        let mut wiener = derive_path_stream(master_seed, path_index, Purpose::Wiener);
        let forward = fine_grid.forward_nodes();
        let wiener_fine = forward
            .windows(2)
            .map(|w| {
                let z: f64 = StandardNormal.sample(&mut wiener);
                libm::sqrt(w[1] - w[0]) * z
            })
            .collect();

        Ok(Self {
            master_seed,
            path_index,
            jump_times,
            fine_grid,
            wiener_fine,
        })
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn fine_grid(&self) -> &JumpAdaptedGrid {
        &self.fine_grid
    }

    /// One increment per interval of the fine grid on `[0, T]`.
    pub fn wiener_fine(&self) -> &[f64] {
        &self.wiener_fine
    }

    /// Grid with step `tau / l` carrying this path's jumps.
    pub fn grid(&self, l: u64) -> Result<JumpAdaptedGrid, NoiseError> {
        JumpAdaptedGrid::build(
            self.fine_grid.tau(),
            self.fine_grid.horizon(),
            l,
            &self.jump_times,
        )
    }

    /// Wiener increments over the intervals of `grid` on `[0, T]`, each the
    /// left-to-right sum of the fine increments it spans.
    pub fn wiener_increments_for_grid(
        &self,
        grid: &JumpAdaptedGrid,
    ) -> Result<Vec<f64>, NoiseError> {
        if grid.jump_count() != self.jump_times.len() {
            return Err(NoiseError::MismatchedJumps);
        }
        let positions = grid.embed_in(&self.fine_grid)?;
        let zero = self.fine_grid.zero_index();
        Ok(aggregate(&self.wiener_fine, &positions, zero))
    }

    /// Flat little-endian record: seed, index, jump count, jump times,
    /// increment count, increments. Debugging aid, not a stable format.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 * (4 + self.jump_times.len() + self.wiener_fine.len()));
        out.extend_from_slice(&self.master_seed.to_le_bytes());
        out.extend_from_slice(&self.path_index.to_le_bytes());
        out.extend_from_slice(&(self.jump_times.len() as u64).to_le_bytes());
        for t in &self.jump_times {
            out.extend_from_slice(&t.to_le_bytes());
        }
        out.extend_from_slice(&(self.wiener_fine.len() as u64).to_le_bytes());
        for w in &self.wiener_fine {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }
}

/// Decoded form of [`NoiseBundle::to_le_bytes`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDump {
    pub master_seed: u64,
    pub path_index: u64,
    pub jump_times: Vec<f64>,
    pub increments: Vec<f64>,
}

impl NoiseDump {
    pub fn from_le_bytes(bytes: &[u8]) -> Option<Self> {
        let mut words = bytes.chunks_exact(8).map(|c| {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(c);
            buf
        });
        if !bytes.len().is_multiple_of(8) {
            return None;
        }
        let master_seed = u64::from_le_bytes(words.next()?);
        let path_index = u64::from_le_bytes(words.next()?);
        let jumps = u64::from_le_bytes(words.next()?) as usize;
        let jump_times = (0..jumps)
            .map(|_| words.next().map(f64::from_le_bytes))
            .collect::<Option<Vec<_>>>()?;
        let count = u64::from_le_bytes(words.next()?) as usize;
        let increments = (0..count)
            .map(|_| words.next().map(f64::from_le_bytes))
            .collect::<Option<Vec<_>>>()?;
        if words.next().is_some() {
            return None;
        }
        Some(Self {
            master_seed,
            path_index,
            jump_times,
            increments,
        })
    }
}

fn aggregate(fine: &[f64], positions: &[usize], zero: usize) -> Vec<f64> {
    positions
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0] - zero, w[1] - zero);
            let mut sum = 0.0;
            for x in &fine[a..b] {
                sum += x;
            }
            sum
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JumpCoeff;
    use proptest::prelude::*;
    use rand::RngCore;

    fn forward_kinds(g: &JumpAdaptedGrid) -> Vec<(f64, bool)> {
        g.forward_nodes()
            .iter()
            .zip(&g.kinds()[g.zero_index()..])
            .map(|(&t, k)| (t, k.is_jump()))
            .collect()
    }

    #[test]
    fn superposes_single_jump() {
        let g = JumpAdaptedGrid::build(1.0, 1.0, 2, &[0.3]).unwrap();
        assert_eq!(
            forward_kinds(&g),
            vec![(0.0, false), (0.3, true), (0.5, false), (1.0, false)]
        );
        assert_eq!(g.nodes()[..3], [-1.0, -0.5, 0.0]);
        assert!(!g.kinds()[..3].iter().any(|k| k.is_jump()));
    }

    #[test]
    fn deterministic_grid_without_jumps() {
        let g = JumpAdaptedGrid::build(1.0, 1.0, 2, &[]).unwrap();
        assert_eq!(
            forward_kinds(&g),
            vec![(0.0, false), (0.5, false), (1.0, false)]
        );
        assert_eq!(g.intervals(), 2);
    }

    #[test]
    fn coincident_jump_is_merged() {
        let g = JumpAdaptedGrid::build(1.0, 1.0, 2, &[0.5]).unwrap();
        assert_eq!(
            forward_kinds(&g),
            vec![(0.0, false), (0.5, true), (1.0, false)]
        );
        assert_eq!(g.kind(g.zero_index() + 1), NodeKind::Merged(1, 0));
        let g = JumpAdaptedGrid::build(1.0, 1.0, 2, &[1.0]).unwrap();
        assert_eq!(g.kind(g.len() - 1), NodeKind::Merged(2, 0));
    }

    #[test]
    fn rejects_bad_jumps() {
        assert_eq!(
            JumpAdaptedGrid::build(1.0, 1.0, 2, &[0.6, 0.3]),
            Err(NoiseError::UnsortedJumps { index: 1 })
        );
        assert!(matches!(
            JumpAdaptedGrid::build(1.0, 1.0, 2, &[1.2]),
            Err(NoiseError::JumpOutOfRange { .. })
        ));
        assert!(matches!(
            JumpAdaptedGrid::build(1.0, 1.0, 2, &[0.0]),
            Err(NoiseError::JumpOutOfRange { .. })
        ));
        assert!(matches!(
            JumpAdaptedGrid::build(1.0, 1.5, 2, &[]),
            Err(NoiseError::HorizonNotMultiple { .. })
        ));
        assert_eq!(
            JumpAdaptedGrid::build(1.0, 1.0, 1, &[]),
            Err(NoiseError::TooCoarse { l: 1 })
        );
    }

    #[test]
    fn multi_period_grid() {
        let g = JumpAdaptedGrid::build(0.5, 1.5, 4, &[0.2, 1.45]).unwrap();
        assert_eq!(g.zero_index(), 4);
        assert_eq!(g.det_count(), 13);
        assert_eq!(g.intervals(), 14);
        assert_eq!(*g.nodes().last().unwrap(), 1.5);
        assert_eq!(g.nodes()[g.det_position(3)], 0.375);
    }

    fn benchmark() -> ModelSpec {
        ModelSpec::benchmark(0.5, 1.0).unwrap()
    }

    #[test]
    fn streams_are_deterministic_and_separated() {
        let a: Vec<u64> = {
            let mut r = derive_path_stream(7, 0, Purpose::Wiener);
            (0..1000).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = derive_path_stream(7, 0, Purpose::Wiener);
            (0..1000).map(|_| r.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut r = derive_path_stream(7, 0, Purpose::Poisson);
            (0..1000).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert!(a.iter().zip(&c).all(|(x, y)| x != y));
    }

    #[test]
    fn bundle_is_pure() {
        let m = benchmark();
        let a = NoiseBundle::generate(&m, 64, 11, 5).unwrap();
        let b = NoiseBundle::generate(&m, 64, 11, 5).unwrap();
        assert_eq!(a.to_le_bytes(), b.to_le_bytes());
        let c = NoiseBundle::generate(&m, 64, 11, 6).unwrap();
        assert_ne!(a.to_le_bytes(), c.to_le_bytes());
    }

    #[test]
    fn identity_aggregation() {
        let m = benchmark();
        let b = NoiseBundle::generate(&m, 32, 3, 1).unwrap();
        let inc = b.wiener_increments_for_grid(b.fine_grid()).unwrap();
        assert_eq!(inc, b.wiener_fine());
    }

    #[test]
    fn aggregation_rejects_incompatible_grids() {
        let m = benchmark();
        let b = NoiseBundle::generate(&m, 64, 3, 2).unwrap();
        let g = JumpAdaptedGrid::build(1.0, 1.0, 24, b.jump_times()).unwrap();
        assert!(matches!(
            b.wiener_increments_for_grid(&g),
            Err(NoiseError::IncompatibleResolution { .. })
        ));
        let mut other = b.jump_times().to_vec();
        other.push(0.999_999);
        other.sort_by(f64::total_cmp);
        let g = JumpAdaptedGrid::build(1.0, 1.0, 8, &other).unwrap();
        assert!(b.wiener_increments_for_grid(&g).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let b = NoiseBundle::generate(&benchmark(), 16, 99, 4).unwrap();
        let dump = NoiseDump::from_le_bytes(&b.to_le_bytes()).unwrap();
        assert_eq!(dump.master_seed, 99);
        assert_eq!(dump.path_index, 4);
        assert_eq!(dump.jump_times, b.jump_times());
        assert_eq!(dump.increments, b.wiener_fine());
        assert!(NoiseDump::from_le_bytes(&[0u8; 12]).is_none());
    }

    #[test]
    fn no_jumps_without_intensity() {
        let m = benchmark()
            .to_builder()
            .lambda(0.0)
            .jump_coeff(JumpCoeff::Zero)
            .build()
            .unwrap();
        for i in 0..100 {
            assert!(NoiseBundle::generate(&m, 8, 1, i)
                .unwrap()
                .jump_times()
                .is_empty());
        }
        let mut r = derive_path_stream(0, 0, Purpose::Poisson);
        let tiny: usize = (0..1000)
            .map(|_| sample_jump_times(1e-12, 1.0, &mut r).len())
            .sum();
        assert_eq!(tiny, 0);
    }

    proptest! {
        #[test]
        fn grid_gaps_are_bounded(
            exp in 1u32..8,
            periods in 1u64..4,
            raw in proptest::collection::vec(0.0f64..1.0, 0..20),
        ) {
            let l = 1u64 << exp;
            let horizon = periods as f64;
            let mut jumps: Vec<f64> = raw.iter().map(|u| (u * horizon).max(1e-9)).collect();
            jumps.sort_by(f64::total_cmp);
            jumps.dedup();
            let g = JumpAdaptedGrid::build(1.0, horizon, l, &jumps).unwrap();
            let delta = g.max_step();
            for w in g.forward_nodes().windows(2) {
                prop_assert!(w[1] > w[0]);
                prop_assert!(w[1] - w[0] <= delta * (1.0 + 1e-12));
            }
            prop_assert_eq!(g.jump_count(), jumps.len());
            prop_assert_eq!(g.det_count() as u64, periods * l + 1);
            for (k, &t) in g.nodes()[..=g.zero_index()].iter().enumerate() {
                prop_assert!((t - (k as f64 - l as f64) / l as f64).abs() < 1e-15);
            }
        }

        #[test]
        fn coupling_is_exact(seed in any::<u64>(), path in 0u64..1000, fine_exp in 3u32..9, drop in 1u32..3) {
            let m = benchmark().to_builder().lambda(3.0).build().unwrap();
            let fine_l = 1u64 << fine_exp;
            let coarse_l = fine_l >> drop;
            prop_assume!(coarse_l >= 2);
            let b = NoiseBundle::generate(&m, fine_l, seed, path).unwrap();
            let coarse = b.grid(coarse_l).unwrap();
            let inc = b.wiener_increments_for_grid(&coarse).unwrap();
            let pos = coarse.embed_in(b.fine_grid()).unwrap();
            let zero = b.fine_grid().zero_index();
            let mut fine_sum = 0.0;
            let mut coarse_sum = 0.0;
            let mut cursor = zero;
            for (k, &p) in pos.iter().enumerate().skip(1) {
                coarse_sum += inc[k - 1];
                while cursor < p {
                    fine_sum += b.wiener_fine()[cursor - zero];
                    cursor += 1;
                }
                prop_assert!((coarse_sum - fine_sum).abs() <= 1e-12);
                prop_assert_eq!(coarse.forward_nodes()[k], b.fine_grid().nodes()[p]);
            }
        }
    }
}
