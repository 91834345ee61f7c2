//! Versioned little-endian binary files for learner checkpoints and DP
//! tables. Every float is stored by its bit pattern, so a load reproduces
//! the saved object exactly.
//!
//! Both layouts start with a 4-byte magic (`QMCK`, `QGRD`) and a `u32`
//! version. Lengths are `u64`, flags `u8`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::benchmark::{GridQTable, GridSpec};
use crate::env::ActionSpace;
use crate::error::{Error, Result};
use crate::kernel::{ActionMode, KernelConfig};
use crate::learner::{ContinuousArgmax, Evaluation, LearnerConfig, LearnerState, QModel, StepSchedule};
use crate::measure::WeightedMeasure;
use crate::rng::SimRng;

const CHECKPOINT_MAGIC: &[u8; 4] = b"QMCK";
const TABLE_MAGIC: &[u8; 4] = b"QGRD";
const VERSION: u32 = 1;

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.len(v.len());
        v.iter().for_each(|x| self.f64(*x));
    }
    fn rng(&mut self, rng: &SimRng) {
        self.0.extend_from_slice(&rng.get_seed());
        self.u64(rng.get_stream());
        self.0.extend_from_slice(&rng.get_word_pos().to_le_bytes());
    }
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.0.len() < n {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Format(format!("invalid flag byte {b}"))),
        }
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        // Each element takes at least one byte, which bounds allocations.
        if n > self.0.len() as u64 {
            return Err(Error::Format(format!("length {n} exceeds remaining file size")));
        }
        Ok(n as usize)
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("count does not fit in usize".into()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn rng(&mut self) -> Result<SimRng> {
        use rand::SeedableRng;
        let seed: [u8; 32] = self.take(32)?.try_into().expect("32 bytes");
        let stream = self.u64()?;
        let pos = u128::from_le_bytes(self.take(16)?.try_into().expect("16 bytes"));
        let mut rng = SimRng::from_seed(seed);
        rng.set_stream(stream);
        rng.set_word_pos(pos);
        Ok(rng)
    }
    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::Format(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
        }
        match self.u32()? {
            VERSION => Ok(()),
            v => Err(Error::Format(format!("unsupported file version {v}"))),
        }
    }
    fn finish(&self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Format(format!("{} trailing bytes", self.0.len())))
        }
    }
}

fn write_schedule(w: &mut Writer, s: &StepSchedule) {
    match *s {
        StepSchedule::AlphaRm { a, b } => {
            w.u8(0);
            w.f64(a);
            w.f64(b);
        }
        StepSchedule::BetaUniform => w.u8(1),
    }
}

fn read_schedule(r: &mut Reader) -> Result<StepSchedule> {
    match r.u8()? {
        0 => Ok(StepSchedule::AlphaRm { a: r.f64()?, b: r.f64()? }),
        1 => Ok(StepSchedule::BetaUniform),
        t => Err(Error::Format(format!("unknown schedule tag {t}"))),
    }
}

fn write_measure(w: &mut Writer, m: &WeightedMeasure) {
    w.len(m.point_len());
    w.f64s(m.coords());
    w.f64s(m.base_weights());
    w.f64(m.global_scale());
    w.u8(m.is_probability() as u8);
}

fn read_measure(r: &mut Reader) -> Result<WeightedMeasure> {
    let point_len = r.usize()?;
    let coords = r.f64s()?;
    let base = r.f64s()?;
    let scale = r.f64()?;
    let is_prob = r.bool()?;
    WeightedMeasure::from_parts(point_len, coords, base, scale, is_prob)
}

fn encode_learner(state: &LearnerState, trajectory: Option<&SimRng>) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(CHECKPOINT_MAGIC);
    w.u32(VERSION);

    let k = state.kernel();
    w.f64(k.sigma());
    w.u8(match k.action_mode() {
        ActionMode::ContinuousBox => 0,
        ActionMode::FiniteActions => 1,
    });
    w.len(k.state_dim());
    w.len(k.action_dim());
    w.f64(k.diameter());

    match state.model().action_space() {
        ActionSpace::Finite(v) => {
            w.u8(0);
            w.len(v.len());
            v.iter().for_each(|a| w.f64s(a));
        }
        ActionSpace::Box { lo, hi } => {
            w.u8(1);
            w.f64s(lo);
            w.f64s(hi);
        }
    }

    let c = state.config();
    w.f64(c.gamma);
    write_schedule(&mut w, &c.alpha);
    write_schedule(&mut w, &c.beta);
    w.u8(match c.evaluation {
        Evaluation::Direct => 0,
        Evaluation::Factored => 1,
    });
    w.len(c.argmax.steps);
    w.len(c.argmax.restarts);
    w.u8(c.argmax.eta.is_some() as u8);
    w.f64(c.argmax.eta.unwrap_or(0.0));

    w.u64(state.iteration());
    w.f64s(state.last_point());
    w.rng(state.argmax_rng());
    write_measure(&mut w, state.mu());
    write_measure(&mut w, state.nu());
    match state.support_actions() {
        Some(a) => {
            w.u8(1);
            w.len(a.len());
            a.iter().for_each(|x| w.u32(*x));
        }
        None => w.u8(0),
    }
    match trajectory {
        Some(rng) => {
            w.u8(1);
            w.rng(rng);
        }
        None => w.u8(0),
    }
    w.0
}

fn decode_learner(bytes: &[u8]) -> Result<(LearnerState, Option<SimRng>)> {
    let mut r = Reader(bytes);
    r.header(CHECKPOINT_MAGIC)?;

    let sigma = r.f64()?;
    let mode = match r.u8()? {
        0 => ActionMode::ContinuousBox,
        1 => ActionMode::FiniteActions,
        t => return Err(Error::Format(format!("unknown kernel mode {t}"))),
    };
    let state_dim = r.usize()?;
    let action_dim = r.usize()?;
    let diameter = r.f64()?;
    let kernel = KernelConfig::new(sigma, mode, state_dim, action_dim, diameter)?;

    let space = match r.u8()? {
        0 => {
            let n = r.len()?;
            ActionSpace::Finite((0..n).map(|_| r.f64s()).collect::<Result<_>>()?)
        }
        1 => ActionSpace::Box { lo: r.f64s()?, hi: r.f64s()? },
        t => return Err(Error::Format(format!("unknown action space tag {t}"))),
    };

    let gamma = r.f64()?;
    let alpha = read_schedule(&mut r)?;
    let beta = read_schedule(&mut r)?;
    let evaluation = match r.u8()? {
        0 => Evaluation::Direct,
        1 => Evaluation::Factored,
        t => return Err(Error::Format(format!("unknown evaluation tag {t}"))),
    };
    let steps = r.usize()?;
    let restarts = r.usize()?;
    let has_eta = r.bool()?;
    let eta = r.f64()?;
    let config = LearnerConfig {
        gamma,
        alpha,
        beta,
        evaluation,
        argmax: ContinuousArgmax {
            steps,
            restarts,
            eta: has_eta.then_some(eta),
        },
    };
    config.validate()?;

    let iteration = r.u64()?;
    let last_point = r.f64s()?;
    let argmax_rng = r.rng()?;
    let mu = read_measure(&mut r)?;
    let nu = read_measure(&mut r)?;
    let support = if r.bool()? {
        let n = r.len()?;
        Some((0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    let trajectory = if r.bool()? { Some(r.rng()?) } else { None };
    r.finish()?;

    if last_point.len() != kernel.point_len() {
        return Err(Error::Format("last point does not match the kernel dimension".into()));
    }
    let model = QModel::from_measures(kernel, space, mu, nu)?.with_support_actions(support, evaluation)?;
    Ok((LearnerState::restore(model, config, iteration, last_point, argmax_rng), trajectory))
}

/// Writes a learner checkpoint, optionally with the trajectory generator.
pub fn save_checkpoint(path: &Path, state: &LearnerState, trajectory: Option<&SimRng>) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_learner(state, trajectory))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(LearnerState, Option<SimRng>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_learner(&bytes)
}

fn encode_table(t: &GridQTable) -> Vec<u8> {
    let mut w = Writer::default();
    w.0.extend_from_slice(TABLE_MAGIC);
    w.u32(VERSION);
    w.f64s(&t.grid.lo);
    w.f64s(&t.grid.hi);
    w.len(t.grid.cells.len());
    t.grid.cells.iter().for_each(|c| w.len(*c));
    w.len(t.n_actions);
    w.f64(t.gamma);
    w.f64(t.residual);
    w.len(t.sweeps);
    w.u8(t.converged as u8);
    w.len(t.demand_samples);
    w.u64(t.seed);
    w.f64s(&t.values);
    w.0
}

fn decode_table(bytes: &[u8]) -> Result<GridQTable> {
    let mut r = Reader(bytes);
    r.header(TABLE_MAGIC)?;
    let lo = r.f64s()?;
    let hi = r.f64s()?;
    let dims = r.len()?;
    let cells = (0..dims).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
    let grid = GridSpec::new(lo, hi, cells)?;
    let n_actions = r.usize()?;
    let gamma = r.f64()?;
    let residual = r.f64()?;
    let sweeps = r.usize()?;
    let converged = r.bool()?;
    let demand_samples = r.usize()?;
    let seed = r.u64()?;
    let values = r.f64s()?;
    r.finish()?;
    if values.len() != grid.n_cells() * n_actions {
        return Err(Error::Format(format!(
            "table holds {} values, expected {}",
            values.len(),
            grid.n_cells() * n_actions
        )));
    }
    Ok(GridQTable {
        grid,
        n_actions,
        values,
        residual,
        sweeps,
        converged,
        gamma,
        demand_samples,
        seed,
    })
}

pub fn save_table(path: &Path, table: &GridQTable) -> Result<()> {
    fs::File::create(path)?.write_all(&encode_table(table))?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<GridQTable> {
    decode_table(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{behavior_transition, DiscreteTestMDP, Environment, LineTrackingEnv};
    use crate::kernel::Action;
    use rand::{Rng, SeedableRng};

    fn trained<E: Environment>(env: &E, mode: ActionMode, a0: Action, steps: usize) -> (LearnerState, SimRng) {
        let kernel = env.kernel_config(0.3, mode).unwrap();
        let mut rng = SimRng::seed_from_u64(7);
        let mut learner = LearnerState::new(
            kernel,
            env.action_space().clone(),
            LearnerConfig::new(0.7),
            &env.initial_state(),
            &a0,
            SimRng::seed_from_u64(8),
        )
        .unwrap();
        let (mut x, mut a) = (env.initial_state(), a0);
        for _ in 0..steps {
            let t = behavior_transition(env, &x, &a, &mut rng).unwrap();
            learner.train_step(&t).unwrap();
            x = t.next_state;
            a = t.next_action;
        }
        (learner, rng)
    }

    fn assert_same(a: &LearnerState, b: &LearnerState) {
        assert_eq!(a.iteration(), b.iteration());
        assert_eq!(a.mu(), b.mu());
        assert_eq!(a.nu(), b.nu());
        assert_eq!(a.last_point(), b.last_point());
        assert_eq!(a.config(), b.config());
        assert_eq!(a.kernel(), b.kernel());
        assert_eq!(a.support_actions(), b.support_actions());
    }

    #[test]
    fn finite_checkpoint_round_trip_resumes_identically() {
        let mdp = DiscreteTestMDP::canonical();
        let (learner, rng) = trained(&mdp, ActionMode::FiniteActions, Action::Index(0), 300);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.bin");
        save_checkpoint(&path, &learner, Some(&rng)).unwrap();
        let (restored, rng2) = load_checkpoint(&path).unwrap();
        let mut rng2 = rng2.unwrap();
        assert_same(&learner, &restored);
        assert_eq!(rng, rng2);

        // Continuing both copies yields identical results.
        let (mut a, mut b) = (learner, restored);
        let mut rng1 = rng;
        let (mut x, mut act) = (vec![1.0], Action::Index(1));
        for _ in 0..50 {
            let t1 = behavior_transition(&mdp, &x, &act, &mut rng1).unwrap();
            let t2 = behavior_transition(&mdp, &x, &act, &mut rng2).unwrap();
            assert_eq!(t1, t2);
            assert_eq!(a.train_step(&t1).unwrap().target_y, b.train_step(&t2).unwrap().target_y);
            x = t1.next_state;
            act = t1.next_action;
        }
        assert_same(&a, &b);
    }

    #[test]
    fn continuous_checkpoint_keeps_argmax_stream() {
        let env = LineTrackingEnv::default();
        let (mut learner, _) = trained(&env, ActionMode::ContinuousBox, Action::Vector(vec![0.0]), 40);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        save_checkpoint(&path, &learner, None).unwrap();
        let (mut restored, none) = load_checkpoint(&path).unwrap();
        assert!(none.is_none());
        assert_same(&learner, &restored);
        assert_eq!(learner.argmax_rng(), restored.argmax_rng());
        let y1 = learner.td_target(0.2, &[0.4]).unwrap();
        let y2 = restored.td_target(0.2, &[0.4]).unwrap();
        assert_eq!(y1, y2);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mdp = DiscreteTestMDP::canonical();
        let (learner, _) = trained(&mdp, ActionMode::FiniteActions, Action::Index(0), 10);
        let bytes = encode_learner(&learner, None);
        assert!(decode_learner(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_learner(&bad).is_err());
        let mut newer = bytes.clone();
        newer[4] = 2;
        assert!(decode_learner(&newer).is_err());
        let mut trailing = bytes;
        trailing.push(0);
        assert!(decode_learner(&trailing).is_err());
    }

    #[test]
    fn table_round_trip() {
        let mut rng = SimRng::seed_from_u64(1);
        let grid = GridSpec::square(15.0, 2, 3).unwrap();
        let table = GridQTable {
            grid,
            n_actions: 4,
            values: (0..36).map(|_| rng.random_range(-3.0..3.0)).collect(),
            residual: 1e-11,
            sweeps: 77,
            converged: true,
            gamma: 0.7,
            demand_samples: 10_000,
            seed: 42,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.qgrd");
        save_table(&path, &table).unwrap();
        assert_eq!(load_table(&path).unwrap(), table);
        let bytes = fs::read(&path).unwrap();
        assert!(decode_table(&bytes[..bytes.len() - 8]).is_err());
    }
}
