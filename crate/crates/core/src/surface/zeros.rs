use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::{lattice_coords, MeromorphicForm};
use crate::error::{Error, Result};
use crate::quad;
use crate::specfun::TorusModulus;

const GRID: usize = 8;

/// Zeros of ω, sorted by the real part of the flat coordinate.  In genus one
/// the first zero is reduced into the fundamental parallelogram and the
/// others are the lattice translates nearest to it.
pub fn find_zeros(form: &MeromorphicForm) -> Result<Vec<C64>> {
    let expected = form.surface().zero_count();
    let raw = match form.surface().modulus() {
        None => sphere_zeros(form)?,
        Some(t) => torus_zeros(form, t)?,
    };
    if raw.len() != expected {
        return Err(Error::CountMismatch { expected, found: raw.len() });
    }
    check_simple(form, &raw)?;
    order_zeros(form, raw)
}

/// Newton refinement of previously located zeros, preserving their order.
pub fn refine_zeros(form: &MeromorphicForm, guesses: &[C64]) -> Result<Vec<C64>> {
    let zs = guesses.iter().map(|g| polish(form, *g)).collect::<Result<Vec<_>>>()?;
    check_simple(form, &zs)?;
    Ok(zs)
}

fn order_zeros(form: &MeromorphicForm, mut zs: Vec<C64>) -> Result<Vec<C64>> {
    let mut keyed = zs.drain(..).map(|z| Ok((form.primitive_re(z)?, z))).collect::<Result<Vec<_>>>()?;
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.re.total_cmp(&b.1.re)).then(a.1.im.total_cmp(&b.1.im)));
    let mut out: Vec<C64> = keyed.into_iter().map(|(_, z)| z).collect();
    if let (Some(t), Some(first)) = (form.surface().modulus(), out.first().copied()) {
        let (s, tt) = lattice_coords(t, first);
        let base = first - s.floor() - t.b() * tt.floor();
        out[0] = base;
        for z in out.iter_mut().skip(1) {
            *z = nearest_translate(t, *z, base);
        }
    }
    Ok(out)
}

pub(crate) fn nearest_translate(t: &TorusModulus, z: C64, target: C64) -> C64 {
    let (u0, _, _) = t.reduce(z - target);
    let mut best = u0;
    for dm in -1..=1 {
        for dn in -1..=1 {
            let cand = u0 + dm as f64 + t.b() * dn as f64;
            if shorter(cand, best) {
                best = cand;
            }
        }
    }
    target + best
}

/// Order on displacements: shorter first, ties broken by the smaller real
/// then imaginary part so that equidistant translates resolve consistently.
fn shorter(a: C64, b: C64) -> bool {
    const TIE: f64 = 1e-9;
    let dn = a.norm() - b.norm();
    if dn.abs() > TIE {
        dn < 0.0
    } else if (a.re - b.re).abs() > TIE {
        a.re < b.re
    } else {
        a.im < b.im - TIE
    }
}

fn check_simple(form: &MeromorphicForm, zs: &[C64]) -> Result<()> {
    let s = form.surface();
    for i in 0..zs.len() {
        for j in 0..i {
            let d = s.separation(zs[i], zs[j]);
            if d < form.tolerances().merge {
                return Err(Error::NonSimpleZero { distance: d });
            }
        }
    }
    Ok(())
}

fn polish(form: &MeromorphicForm, mut z: C64) -> Result<C64> {
    for _ in 0..80 {
        let [f, df, _] = form.jet(z)?;
        if df.norm() == 0.0 {
            return Err(Error::NonSimpleZero { distance: 0.0 });
        }
        let step = f / df;
        z -= step;
        if step.norm() <= 1e-15 * (1.0 + z.norm()) {
            break;
        }
    }
    let [f, df, _] = form.jet(z)?;
    let s = form.surface();
    let dist = s.points().iter().map(|p| s.separation(z, *p)).fold(f64::INFINITY, f64::min);
    let scale: f64 = s.residues().iter().map(|a| a.abs()).sum::<f64>() / dist.max(1e-300);
    if !(f.norm() <= 1e-11 * scale) || df.norm() == 0.0 {
        return Err(Error::NonFinite("Newton refinement of a zero"));
    }
    Ok(z)
}

fn sphere_zeros(form: &MeromorphicForm) -> Result<Vec<C64>> {
    let s = form.surface();
    let n = s.len();
    if n == 2 {
        return Ok(Vec::new());
    }
    // numerator Σ α_m ∏_{j≠m} (z − z_j), ascending coefficients
    let mut num = vec![C64::new(0.0, 0.0); n];
    for (m, a) in s.residues().iter().enumerate() {
        let mut prod = vec![C64::new(1.0, 0.0)];
        for (j, p) in s.points().iter().enumerate() {
            if j != m {
                let mut next = vec![C64::new(0.0, 0.0); prod.len() + 1];
                for (k, c) in prod.iter().enumerate() {
                    next[k + 1] += *c;
                    next[k] -= *c * p;
                }
                prod = next;
            }
        }
        for (k, c) in prod.iter().enumerate() {
            num[k] += *c * *a;
        }
    }
    num.truncate(n - 1);
    let lead: C64 = s.points().iter().zip(s.residues()).map(|(p, a)| p * *a).sum();
    let scale: f64 = s.points().iter().zip(s.residues()).map(|(p, a)| a.abs() * (1.0 + p.norm())).sum();
    if lead.norm() < 1e-10 * scale {
        return Err(Error::DegenerateSurface(
            "Σα_m z_m vanishes: a zero sits at the chart's infinity; move it with a Möbius map".into(),
        ));
    }
    num[n - 2] = lead;
    poly_roots(&num)?.into_iter().map(|z| polish(form, z)).collect()
}

/// Roots of `Σ c_k z^k` (ascending coefficients, nonzero leading term) by
/// Aberth–Ehrlich iteration.
pub(crate) fn poly_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[deg];
    let monic: Vec<C64> = coeffs.iter().map(|c| c / lead).collect();
    if deg == 1 {
        return Ok(vec![-monic[0]]);
    }
    let radius = 1.0 + monic[..deg].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut roots: Vec<C64> = (0..deg)
        .map(|k| C64::from_polar(0.5 * radius, 2.0 * PI * (k as f64 + 0.25) / deg as f64))
        .collect();
    let eval = |z: C64| -> (C64, C64) {
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for c in monic.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..deg {
            let (p, dp) = eval(roots[k]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: C64 = (0..deg).filter(|j| *j != k).map(|j| (roots[k] - roots[j]).inv()).sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * repulsion);
            roots[k] -= step;
            moved = moved.max(step.norm() / (1.0 + roots[k].norm()));
        }
        if moved < 1e-15 {
            return Ok(roots);
        }
    }
    Err(Error::NonFinite("polynomial root iteration"))
}

/// Offset in `[0,1)` keeping the given fractional coordinates away from the
/// grid lines `offset + k/GRID`.
fn grid_offset(values: &[f64], shift: f64) -> f64 {
    let score = |o: f64| {
        values
            .iter()
            .map(|v| {
                let x = ((v - o) * GRID as f64).rem_euclid(1.0);
                x.min(1.0 - x)
            })
            .fold(0.5, f64::min)
    };
    let mut best = (shift, score(shift));
    for k in 0..101 {
        let o = (shift + k as f64 / (101.0 * GRID as f64)).rem_euclid(1.0);
        let sc = score(o);
        if sc > best.1 + 1e-12 {
            best = (o, sc);
        }
    }
    best.0
}

fn torus_zeros(form: &MeromorphicForm, t: &TorusModulus) -> Result<Vec<C64>> {
    let expected = form.surface().zero_count();
    let mut last = 0;
    for attempt in 0..6 {
        let jitter = 0.013 * attempt as f64;
        match torus_zeros_on_grid(form, t, jitter)? {
            Some(zs) if zs.len() == expected => return Ok(zs),
            Some(zs) => last = zs.len(),
            None => {}
        }
    }
    Err(Error::CountMismatch { expected, found: last })
}

fn torus_zeros_on_grid(form: &MeromorphicForm, t: &TorusModulus, jitter: f64) -> Result<Option<Vec<C64>>> {
    let b = t.b();
    let coords: Vec<(f64, f64)> = form.surface().points().iter().map(|p| lattice_coords(t, *p)).collect();
    let ss: Vec<f64> = coords.iter().map(|c| c.0).collect();
    let ts: Vec<f64> = coords.iter().map(|c| c.1).collect();
    let s_off = grid_offset(&ss, jitter);
    let t_off = grid_offset(&ts, 0.37 * jitter);
    let off = b * t_off + s_off;
    let h = 1.0 / GRID as f64;
    let corner = |i: usize, j: usize| off + h * i as f64 + b * (h * j as f64);

    // poles inside each cell, as representatives lying in that cell
    let mut cell_poles: Vec<Vec<C64>> = vec![Vec::new(); GRID * GRID];
    for &(s, tt) in &coords {
        let su = (s - s_off).rem_euclid(1.0);
        let tu = (tt - t_off).rem_euclid(1.0);
        let (i, j) = (((su * GRID as f64) as usize).min(GRID - 1), ((tu * GRID as f64) as usize).min(GRID - 1));
        cell_poles[i * GRID + j].push(off + su + b * tu);
    }

    let quad_tol = form.tolerances().quad.max(1e-13);
    let logderiv = |z: C64, center: C64, k: i32| -> C64 {
        match form.jet(z) {
            Ok([f, df, _]) => (z - center).powi(k) * df / f,
            Err(_) => C64::new(f64::NAN, f64::NAN),
        }
    };
    let boundary = |i: usize, j: usize, k: i32| -> Result<C64> {
        let center = corner(i, j) + (h + b * h) * 0.5;
        let pts = [corner(i, j), corner(i + 1, j), corner(i + 1, j + 1), corner(i, j + 1)];
        let mut total = C64::new(0.0, 0.0);
        for e in 0..4 {
            total += quad::segment(|z| logderiv(z, center, k), pts[e], pts[(e + 1) % 4], quad_tol)?;
        }
        Ok(total / (2.0 * PI * C64::new(0.0, 1.0)))
    };

    let mut zeros = Vec::new();
    for i in 0..GRID {
        for j in 0..GRID {
            let ap = match boundary(i, j, 0) {
                Ok(v) => v,
                Err(_) => return Ok(None),
            };
            if (ap.re - ap.re.round()).abs() > 0.05 || ap.im.abs() > 0.05 {
                return Ok(None);
            }
            let poles = &cell_poles[i * GRID + j];
            let count = ap.re.round() as i64 + poles.len() as i64;
            if count < 0 {
                return Ok(None);
            }
            if count == 0 {
                continue;
            }
            let center = corner(i, j) + (h + b * h) * 0.5;
            let count = count as usize;
            let mut power = vec![C64::new(0.0, 0.0); count + 1];
            for (k, slot) in power.iter_mut().enumerate().skip(1) {
                let mut v = match boundary(i, j, k as i32) {
                    Ok(v) => v,
                    Err(_) => return Ok(None),
                };
                for p in poles {
                    v += (p - center).powi(k as i32);
                }
                *slot = v;
            }
            // Newton identities: elementary symmetric polynomials from power sums
            let mut e = vec![C64::new(1.0, 0.0); count + 1];
            for k in 1..=count {
                let mut acc = C64::new(0.0, 0.0);
                for m in 1..=k {
                    let term = e[k - m] * power[m];
                    acc += if m % 2 == 1 { term } else { -term };
                }
                e[k] = acc / k as f64;
            }
            let coeffs: Vec<C64> =
                (0..=count).map(|k| if (count - k) % 2 == 0 { e[count - k] } else { -e[count - k] }).collect();
            for r in poly_roots(&coeffs)? {
                zeros.push(polish(form, center + r)?);
            }
        }
    }
    // dedupe modulo the lattice
    let mut unique: Vec<C64> = Vec::new();
    for z in zeros {
        if unique.iter().all(|u| t.lattice_distance(z - u) > 1e-9) {
            unique.push(z);
        }
    }
    Ok(Some(unique))
}
