//! `XFI1` instance container.
//!
//! ```text
//! "XFI1" | class u8 | dim u32 | seed u64 | class payload
//! ```
//!
//! Floats, including every frozen Monte-Carlo draw, are little-endian f64, so a
//! loaded instance scores every solution exactly like the original.

use std::sync::Arc;

use super::{
    ContaminationParams, ExternalClient, ExternalSpec, InfluenceParams, Instance, Interaction,
    Params, ProblemClass, Solution,
};
use crate::codec::{pack_bits, unpack_bits, ByteReader, ByteWriter};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"XFI1";
const MAX_LEN: usize = 1 << 28;

pub fn save_instance(instance: &Instance) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MAGIC);
    w.u8(instance.class.code());
    w.u32(instance.dim as u32);
    w.u64(instance.seed);
    match &instance.params {
        Params::OneMax { reference } => w.bytes(&pack_bits(reference.bits())),
        Params::Knapsack { values, weights, capacity } => {
            w.f64s(values);
            w.f64s(weights);
            w.f64(*capacity);
        }
        Params::MaxCut { adjacency, k } => {
            w.u32(*k as u32);
            w.bytes(&pack_bits(adjacency));
        }
        Params::Contamination(p) => {
            w.f64s(&p.costs);
            w.f64(p.lambda);
            w.f64(p.rho);
            w.f64(p.threshold);
            w.u32(p.simulations as u32);
            w.f64s(&p.alpha);
            w.f64s(&p.gamma);
            w.f64s(&p.z0);
        }
        Params::Influence(p) => {
            w.u32(p.nodes as u32);
            w.u64(p.targets.len() as u64);
            for &o in &p.offsets {
                w.u32(o);
            }
            for (&t, &pr) in p.targets.iter().zip(&p.probs) {
                w.u32(t);
                w.f64(pr);
            }
            w.u32(p.seeds_a.len() as u32);
            p.seeds_a.iter().for_each(|&s| w.u32(s));
            w.u32(p.candidates.len() as u32);
            p.candidates.iter().for_each(|&c| w.u32(c));
            w.u32(p.k as u32);
            for q in [p.q.a_alone, p.q.a_given_b, p.q.b_alone, p.q.b_given_a] {
                w.f64(q);
            }
            w.u32(p.world_seeds.len() as u32);
            p.world_seeds.iter().for_each(|&s| w.u64(s));
        }
        Params::External(client) => {
            let spec = &client.spec;
            w.u32(spec.command.len() as u32);
            spec.command.iter().for_each(|c| w.str(c));
            w.u32(spec.env.len() as u32);
            for (k, v) in &spec.env {
                w.str(k);
                w.str(v);
            }
            w.u64(spec.timeout_ms);
        }
    }
    w.into_inner()
}

fn check_len(n: usize, what: &str) -> Result<usize> {
    if n > MAX_LEN {
        return Err(Error::corrupt(format!("{what} length {n} out of range")));
    }
    Ok(n)
}

pub fn load_instance(bytes: &[u8]) -> Result<Instance> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(4)?;
    if magic != MAGIC {
        if &magic[..3] == b"XFI" {
            return Err(Error::VersionMismatch(String::from_utf8_lossy(magic).into_owned()));
        }
        return Err(Error::corrupt("not an instance file"));
    }
    let class = ProblemClass::from_code(r.u8()?)?;
    let dim = check_len(r.u32()? as usize, "dimension")?;
    let seed = r.u64()?;
    let expect = |v: &Vec<f64>, n: usize, what: &str| -> Result<()> {
        if v.len() != n {
            return Err(Error::corrupt(format!("{what} has {} entries, expected {n}", v.len())));
        }
        Ok(())
    };
    let params = match class {
        ProblemClass::OneMax => {
            let bits = unpack_bits(r.take(dim.div_ceil(8))?, dim);
            Params::OneMax { reference: Solution::from_bits_unchecked(bits) }
        }
        ProblemClass::Knapsack => {
            let values = r.f64s(MAX_LEN)?;
            let weights = r.f64s(MAX_LEN)?;
            expect(&values, dim, "values")?;
            expect(&weights, dim, "weights")?;
            Params::Knapsack { values, weights, capacity: r.f64()? }
        }
        ProblemClass::MaxCut => {
            let k = r.u32()? as usize;
            let adjacency = unpack_bits(r.take((dim * dim).div_ceil(8))?, dim * dim);
            Params::MaxCut { adjacency, k }
        }
        ProblemClass::Contamination => {
            let costs = r.f64s(MAX_LEN)?;
            expect(&costs, dim, "costs")?;
            let lambda = r.f64()?;
            let rho = r.f64()?;
            let threshold = r.f64()?;
            let simulations = r.u32()? as usize;
            let alpha = r.f64s(MAX_LEN)?;
            let gamma = r.f64s(MAX_LEN)?;
            let z0 = r.f64s(MAX_LEN)?;
            expect(&alpha, simulations * dim, "alpha draws")?;
            expect(&gamma, simulations * dim, "gamma draws")?;
            expect(&z0, simulations, "initial draws")?;
            Params::Contamination(ContaminationParams {
                costs,
                lambda,
                rho,
                threshold,
                simulations,
                alpha,
                gamma,
                z0,
            })
        }
        ProblemClass::Influence => {
            let nodes = check_len(r.u32()? as usize, "node count")?;
            let arcs = check_len(r.u64()? as usize, "arc count")?;
            let offsets = (0..=nodes).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let mut targets = Vec::with_capacity(arcs.min(r.remaining() / 12));
            let mut probs = Vec::with_capacity(targets.capacity());
            for _ in 0..arcs {
                targets.push(r.u32()?);
                probs.push(r.f64()?);
            }
            let n_a = check_len(r.u32()? as usize, "seed set")?;
            let seeds_a = (0..n_a).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let n_c = check_len(r.u32()? as usize, "candidate set")?;
            let candidates = (0..n_c).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let k = r.u32()? as usize;
            let q = Interaction {
                a_alone: r.f64()?,
                a_given_b: r.f64()?,
                b_alone: r.f64()?,
                b_given_a: r.f64()?,
            };
            let n_w = check_len(r.u32()? as usize, "world count")?;
            let world_seeds = (0..n_w).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            let bad_node = |v: &u32| *v as usize >= nodes;
            if candidates.len() != dim
                || offsets.last().map(|&o| o as usize) != Some(arcs)
                || offsets.windows(2).any(|w| w[0] > w[1])
                || targets.iter().any(bad_node)
                || seeds_a.iter().any(bad_node)
                || candidates.iter().any(bad_node)
                || world_seeds.is_empty()
            {
                return Err(Error::corrupt("inconsistent influence graph"));
            }
            Params::Influence(InfluenceParams {
                nodes,
                offsets,
                targets,
                probs,
                seeds_a,
                candidates,
                k,
                q,
                world_seeds,
                worlds: Default::default(),
            })
        }
        ProblemClass::External => {
            let argc = check_len(r.u32()? as usize, "argument list")?;
            let command = (0..argc).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
            let envc = check_len(r.u32()? as usize, "environment")?;
            let env = (0..envc).map(|_| Ok((r.str()?, r.str()?))).collect::<Result<Vec<_>>>()?;
            let timeout_ms = r.u64()?;
            let spec = ExternalSpec { command, env, timeout_ms };
            Params::External(Arc::new(ExternalClient::new(spec, dim)))
        }
    };
    r.finish()?;
    Ok(Instance { class, dim, seed, params })
}
