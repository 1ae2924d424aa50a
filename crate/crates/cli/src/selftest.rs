//! Fast invariant checks, run by `mcaoi selftest`.

use std::io::{self, Write};

use mcaoi::{
    aoi_mp_equal_snr, aoi_mp_general, aoi_scheme, epsilon_cs, epsilon_single, mp_aoi_quadratic, mp_eigenvalues,
    optimize_blocklength, optimize_split, q_function, simulate, BlocklengthRange, ChannelSet, ErrorProbability,
    Schedule, SchemeConfig, SchemeSpec, ShiftMode, ShiftSearch, SimConfig,
};

use crate::{EXIT_FAILURE, EXIT_OK};

type Check = (&'static str, fn() -> Result<bool, mcaoi::Error>);

fn ep(v: f64) -> ErrorProbability<f64> {
    ErrorProbability::new(v).expect("constant in [0, 1]")
}

fn q_symmetry() -> Result<bool, mcaoi::Error> {
    Ok((-800..=800).all(|i| {
        let x = f64::from(i) / 100.0;
        (q_function(x) + q_function(-x) - 1.0).abs() <= 1e-12
    }))
}

fn rate_at_capacity() -> Result<bool, mcaoi::Error> {
    Ok(epsilon_single(100.0, 100.0, 3.0)?.value() == 0.5)
}

fn cs_single_channel() -> Result<bool, mcaoi::Error> {
    let c = ChannelSet::new(vec![2.0])?;
    Ok(epsilon_cs(50.0, 16.0, &c)? == epsilon_single(50.0, 16.0, 2.0)?)
}

fn pd_is_aligned_mp() -> Result<bool, mcaoi::Error> {
    for count in 2..=6 {
        for &e in &[0.05, 0.3, 0.7] {
            let aligned = Schedule::aligned(100.0, count)?;
            let mp = aoi_mp_general(&aligned, &vec![ep(e); count])?.0.avg_aoi;
            let pd = mcaoi::aoi_renewal(100.0, ep(e.powi(count as i32)))?.avg_aoi;
            if (mp - pd).abs() > 1e-10 * pd {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn uniform_schedule_closed_form() -> Result<bool, mcaoi::Error> {
    for count in 1..=6 {
        for &e in &[0.05, 0.3, 0.7] {
            let uniform = Schedule::uniform(90.0, count)?;
            let general = aoi_mp_general(&uniform, &vec![ep(e); count])?.0.avg_aoi;
            let closed = aoi_mp_equal_snr(90.0, count, ep(e))?.avg_aoi;
            let quad = mp_aoi_quadratic(&uniform, ep(e))?;
            if (general - closed).abs() > 1e-9 * closed || (quad - closed).abs() > 1e-9 * closed {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn eigenvalues_positive() -> Result<bool, mcaoi::Error> {
    for count in 2..=8 {
        for &e in &[0.01, 0.1, 0.5, 0.9] {
            if mp_eigenvalues(count, ep(e))?.iter().any(|&l| !(l > 0.0)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn equal_split() -> Result<bool, mcaoi::Error> {
    let c = ChannelSet::homogeneous(3, 2.0)?;
    let got = optimize_split(60.0_f64, 48.0, &c)?;
    Ok(got.allocation.splits.iter().all(|&s| (s - 16.0).abs() <= 1e-9 * 48.0))
}

fn ordering() -> Result<bool, mcaoi::Error> {
    let c = ChannelSet::homogeneous(2, 2.0)?;
    let range = BlocklengthRange::default_for(16, &c);
    let opt = |spec| optimize_blocklength(spec, 16, &c, range).map(|r| r.avg_aoi);
    let cs = opt(SchemeSpec::Cs)?;
    let mp = opt(SchemeSpec::Mp {
        shifts: ShiftMode::Integer,
        search: ShiftSearch::Auto,
    })?;
    let pd = opt(SchemeSpec::Pd)?;
    Ok(cs <= mp && mp <= pd)
}

fn error_free_simulation() -> Result<bool, mcaoi::Error> {
    let c = ChannelSet::new(vec![2.0, 2.0])?;
    let sc = SimConfig::new(SchemeConfig::Sc { n: 40.0, k: 8.0, channel: 0 }, c.clone(), 100_000, 1).with_errors(vec![0.0]);
    let mp = SimConfig::new(
        SchemeConfig::Mp {
            k: 8.0,
            schedule: Schedule::new(40.0, vec![0.0, 20.0])?,
        },
        c,
        100_000,
        1,
    )
    .with_errors(vec![0.0, 0.0]);
    Ok(simulate(&sc)?.avg_aoi == 60.0 && simulate(&mp)?.avg_aoi == 50.0)
}

fn sc_reduction() -> Result<bool, mcaoi::Error> {
    let c = ChannelSet::new(vec![2.0])?;
    let sc = aoi_scheme(&SchemeConfig::Sc { n: 100.0, k: 16.0, channel: 0 }, &c)?;
    let pd = aoi_scheme(&SchemeConfig::Pd { n: 100.0, k: 16.0 }, &c)?;
    Ok(sc == pd)
}

const CHECKS: [Check; 10] = [
    ("q_function symmetry", q_symmetry),
    ("epsilon at capacity is one half", rate_at_capacity),
    ("CS on one channel equals SC", cs_single_channel),
    ("PD on one channel equals SC", sc_reduction),
    ("aligned MP equals PD", pd_is_aligned_mp),
    ("uniform MP closed form", uniform_schedule_closed_form),
    ("quadratic form eigenvalues positive", eigenvalues_positive),
    ("equal SNR split is even", equal_split),
    ("CS <= MP <= PD ordering", ordering),
    ("error-free simulation is exact", error_free_simulation),
];

pub fn run(out: &mut dyn Write) -> io::Result<i32> {
    let mut failed = 0;
    for (name, check) in CHECKS {
        let verdict = match check() {
            Ok(true) => "ok".to_string(),
            Ok(false) => {
                failed += 1;
                "FAIL".to_string()
            }
            Err(e) => {
                failed += 1;
                format!("FAIL ({e})")
            }
        };
        writeln!(out, "{verdict:<4} {name}")?;
    }
    writeln!(out, "{} of {} checks passed", CHECKS.len() - failed, CHECKS.len())?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILURE })
}
