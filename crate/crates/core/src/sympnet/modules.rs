//! Shear modules and their evaluation kernels.
//!
//! Every module acts on a flat state `x = [p, q]` of length `2d` and moves
//! exactly one half of it by a function of the other half. Each kernel comes
//! in four flavours:
//!
//! * `forward`: in-place evaluation;
//! * `forward_split`: evaluation on `x = base + off` where every `h`-scaled
//!   increment goes to `off` and `h`-free linear maps act on both parts. The
//!   `base` path then does not depend on `h`, which lets `h`-derivatives be
//!   taken by finite differences of `off` alone without round-off from `x`;
//! * `jvp`: tangent propagation at a fixed input (for Jacobians);
//! * `vjp`: adjoint propagation, accumulating parameter gradients and
//!   returning the adjoints of the step `h` and of the module's clock `t`.

use serde::{Deserialize, Serialize};

use super::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Moves `p` by a function of `q`.
    Up,
    /// Moves `q` by a function of `p`.
    Low,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::Up => Direction::Low,
            Direction::Low => Direction::Up,
        }
    }
}

/// Returns `(dst, src)`: the half that moves and the half it depends on.
#[inline(always)]
fn halves(x: &mut [f64], d: usize, dir: Direction) -> (&mut [f64], &mut [f64]) {
    let (p, q) = x.split_at_mut(d);
    match dir {
        Direction::Up => (p, q),
        Direction::Low => (q, p),
    }
}

#[inline(always)]
fn src_of(x: &[f64], d: usize, dir: Direction) -> &[f64] {
    match dir {
        Direction::Up => &x[d..],
        Direction::Low => &x[..d],
    }
}

#[inline(always)]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Length of the upper-triangle storage of a symmetric `d×d` matrix.
pub fn sym_len(d: usize) -> usize {
    d * (d + 1) / 2
}

#[inline(always)]
fn sym_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows above i hold d, d-1, …, d-i+1 entries
    i * d - i * i.saturating_sub(1) / 2 + (j - i)
}

/// `out += coef · S v` for `S` stored as its upper triangle.
#[inline(always)]
fn sym_mul_add(s: &[f64], d: usize, v: &[f64], coef: f64, out: &mut [f64]) {
    if d == 1 {
        out[0] += coef * s[0] * v[0];
        return;
    }
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += s[sym_index(d, i, j)] * v[j];
        }
        out[i] += coef * acc;
    }
}

/// `g += coef · ∂(uᵀ S v)/∂S` for the upper-triangle entries.
#[inline(always)]
fn sym_outer_add(g: &mut [f64], d: usize, u: &[f64], v: &[f64], coef: f64) {
    if d == 1 {
        g[0] += coef * u[0] * v[0];
        return;
    }
    for i in 0..d {
        g[sym_index(d, i, i)] += coef * u[i] * v[i];
        for j in i + 1..d {
            g[sym_index(d, i, j)] += coef * (u[i] * v[j] + u[j] * v[i]);
        }
    }
}

/// Reusable buffers for the kernels.
#[derive(Debug, Default, Clone)]
pub struct Scratch {
    z: Vec<f64>,
    s: Vec<f64>,
    w: Vec<f64>,
    arg: Vec<f64>,
    out: Vec<f64>,
    states: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
}

fn ensure(buf: &mut Vec<f64>, n: usize) {
    if buf.len() < n {
        buf.resize(n, 0.0);
    }
}

/// `[I, h·Kᵀdiag(a)σ(K· + ct + b); 0, I]` (or its lower counterpart).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientModule {
    /// `n×d`, row-major.
    pub k: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Time coefficients; present only in non-autonomous networks.
    pub c: Option<Vec<f64>>,
    pub direction: Direction,
}

impl GradientModule {
    pub fn width(&self) -> usize {
        self.a.len()
    }

    pub fn dim(&self) -> usize {
        self.k.len() / self.a.len()
    }

    pub fn param_count(&self) -> usize {
        self.k.len() + self.a.len() + self.b.len() + self.c.as_ref().map_or(0, Vec::len)
    }

    fn preact(&self, src: &[f64], t: f64, z: &mut [f64]) {
        let d = src.len();
        for (i, zi) in z.iter_mut().enumerate().take(self.width()) {
            let row = &self.k[i * d..(i + 1) * d];
            *zi = dot(row, src) + self.b[i];
            if let Some(c) = &self.c {
                *zi += c[i] * t;
            }
        }
    }

    /// `out = Kᵀ diag(a) σ(z)`; leaves `σ(z)` in `ws.s`.
    fn shear(&self, act: Activation, src: &[f64], t: f64, out: &mut [f64], ws: &mut Scratch) {
        let (n, d) = (self.width(), src.len());
        ensure(&mut ws.z, n);
        ensure(&mut ws.s, n);
        self.preact(src, t, &mut ws.z);
        out[..d].fill(0.0);
        for i in 0..n {
            let si = act.value(ws.z[i]);
            ws.s[i] = si;
            let coef = self.a[i] * si;
            let row = &self.k[i * d..(i + 1) * d];
            for j in 0..d {
                out[j] += row[j] * coef;
            }
        }
    }

    fn forward(&self, act: Activation, h: f64, t: f64, x: &mut [f64], ws: &mut Scratch) {
        let d = x.len() / 2;
        let mut out = std::mem::take(&mut ws.out);
        ensure(&mut out, d);
        let (dst, src) = halves(x, d, self.direction);
        self.shear(act, src, t, &mut out, ws);
        for j in 0..d {
            dst[j] += h * out[j];
        }
        ws.out = out;
    }

    fn forward_split(
        &self,
        act: Activation,
        h: f64,
        t: f64,
        base: &[f64],
        off: &mut [f64],
        ws: &mut Scratch,
    ) {
        let d = base.len() / 2;
        let mut arg = std::mem::take(&mut ws.arg);
        let mut out = std::mem::take(&mut ws.out);
        ensure(&mut arg, d);
        ensure(&mut out, d);
        let bsrc = src_of(base, d, self.direction);
        let (odst, osrc) = halves(off, d, self.direction);
        for j in 0..d {
            arg[j] = bsrc[j] + osrc[j];
        }
        self.shear(act, &arg[..d], t, &mut out, ws);
        for j in 0..d {
            odst[j] += h * out[j];
        }
        ws.arg = arg;
        ws.out = out;
    }

    fn jvp(&self, act: Activation, h: f64, t: f64, x: &[f64], dx: &mut [f64], ws: &mut Scratch) {
        let (n, d) = (self.width(), x.len() / 2);
        ensure(&mut ws.z, n);
        ensure(&mut ws.w, n);
        self.preact(src_of(x, d, self.direction), t, &mut ws.z);
        let (ddst, dsrc) = halves(dx, d, self.direction);
        for i in 0..n {
            let row = &self.k[i * d..(i + 1) * d];
            ws.w[i] = self.a[i] * act.derivative(ws.z[i]) * dot(row, dsrc);
        }
        for i in 0..n {
            let row = &self.k[i * d..(i + 1) * d];
            for j in 0..d {
                ddst[j] += h * row[j] * ws.w[i];
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn vjp(
        &self,
        act: Activation,
        h: f64,
        t: f64,
        x: &[f64],
        xbar: &mut [f64],
        grad: &mut [f64],
        ws: &mut Scratch,
    ) -> (f64, f64) {
        let (n, d) = (self.width(), x.len() / 2);
        ensure(&mut ws.z, n);
        let src = src_of(x, d, self.direction);
        self.preact(src, t, &mut ws.z);
        let (gk, rest) = grad.split_at_mut(n * d);
        let (ga, rest) = rest.split_at_mut(n);
        let (gb, gc) = rest.split_at_mut(n);
        let (u, sbar) = halves(xbar, d, self.direction);
        let (mut hbar, mut tbar) = (0.0, 0.0);
        for i in 0..n {
            let row = &self.k[i * d..(i + 1) * d];
            let ku = dot(row, u);
            let (sig, dsig) = act.value_and_derivative(ws.z[i]);
            let s = self.a[i] * sig;
            hbar += ku * s;
            ga[i] += h * ku * sig;
            let r = h * ku * self.a[i] * dsig;
            gb[i] += r;
            if let Some(c) = &self.c {
                gc[i] += r * t;
                tbar += r * c[i];
            }
            let grow = &mut gk[i * d..(i + 1) * d];
            for j in 0..d {
                grow[j] += h * s * u[j] + r * src[j];
                sbar[j] += row[j] * r;
            }
        }
        (hbar, tbar)
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.k);
        out.extend_from_slice(&self.a);
        out.extend_from_slice(&self.b);
        if let Some(c) = &self.c {
            out.extend_from_slice(c);
        }
    }

    fn read_params(&mut self, src: &[f64]) -> usize {
        let mut at = 0;
        for v in [&mut self.k, &mut self.a, &mut self.b] {
            let n = v.len();
            v.copy_from_slice(&src[at..at + n]);
            at += n;
        }
        if let Some(c) = &mut self.c {
            let n = c.len();
            c.copy_from_slice(&src[at..at + n]);
            at += n;
        }
        at
    }
}

/// Product of alternating shears by symmetric matrices `S_1, …, S_n`,
/// optionally followed by a bias translation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModule {
    pub d: usize,
    /// Upper triangles of `S_1..S_n`, each of length `d(d+1)/2`.
    pub s: Vec<Vec<f64>>,
    /// Direction of the first shear `S_1`; later ones alternate.
    pub start: Direction,
    /// Length `2d`; present only in the original linear-activation networks.
    pub bias: Option<Vec<f64>>,
}

impl LinearModule {
    pub fn sublayers(&self) -> usize {
        self.s.len()
    }

    pub fn param_count(&self) -> usize {
        self.s.iter().map(Vec::len).sum::<usize>() + self.bias.as_ref().map_or(0, Vec::len)
    }

    /// Full symmetric matrix of sublayer `k`, row-major.
    pub fn sublayer_matrix(&self, k: usize) -> Vec<f64> {
        let d = self.d;
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = self.s[k][sym_index(d, i, j)];
            }
        }
        m
    }

    #[inline(always)]
    fn dir(&self, k: usize) -> Direction {
        if k % 2 == 0 {
            self.start
        } else {
            self.start.flip()
        }
    }

    /// Sublayer applied at position `j` and the sign of its shear.
    #[inline(always)]
    fn step(&self, j: usize, inverse: bool) -> (usize, f64) {
        if inverse {
            (self.s.len() - 1 - j, -1.0)
        } else {
            (j, 1.0)
        }
    }

    /// Sublayer indices in application order with the sign of their shear.
    #[inline(always)]
    fn sequence(&self, inverse: bool) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.s.len()).map(move |j| self.step(j, inverse))
    }

    #[inline(always)]
    fn sublayer(&self, k: usize, coef: f64, x: &mut [f64]) {
        let (dst, src) = halves(x, self.d, self.dir(k));
        sym_mul_add(&self.s[k], self.d, src, coef, dst);
    }

    /// Applies the module (or its inverse) with every shear scaled by
    /// `scale`. The bias, when present, is scaled too.
    pub(crate) fn run(&self, scale: f64, inverse: bool, x: &mut [f64]) {
        if inverse {
            if let Some(b) = &self.bias {
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= scale * bi);
            }
        }
        for (k, sign) in self.sequence(inverse) {
            self.sublayer(k, sign * scale, x);
        }
        if !inverse {
            if let Some(b) = &self.bias {
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += scale * bi);
            }
        }
    }

    /// Bias-free linear part; used for tangents.
    fn run_linear(&self, scale: f64, inverse: bool, x: &mut [f64]) {
        for (k, sign) in self.sequence(inverse) {
            self.sublayer(k, sign * scale, x);
        }
    }

    /// Split evaluation of an `h`-scaled module: every shear increment goes
    /// to `off`.
    fn forward_split_scaled(&self, scale: f64, base: &[f64], off: &mut [f64], ws: &mut Scratch) {
        let d = self.d;
        ensure(&mut ws.arg, d);
        for k in 0..self.s.len() {
            let dir = self.dir(k);
            let bsrc = src_of(base, d, dir);
            let (odst, osrc) = halves(off, d, dir);
            for j in 0..d {
                ws.arg[j] = bsrc[j] + osrc[j];
            }
            sym_mul_add(&self.s[k], d, &ws.arg[..d], scale, odst);
        }
        if let Some(b) = &self.bias {
            off.iter_mut().zip(b).for_each(|(o, bi)| *o += scale * bi);
        }
    }

    /// Adjoint of `run(scale, inverse, ·)` at input `x`. Returns the adjoint
    /// of `scale`.
    fn vjp(
        &self,
        scale: f64,
        inverse: bool,
        x: &[f64],
        xbar: &mut [f64],
        grad: &mut [f64],
        ws: &mut Scratch,
    ) -> f64 {
        let (d, n) = (self.d, self.s.len());
        let dd = 2 * d;
        let sl = sym_len(d);
        ensure(&mut ws.states, n * dd);
        let states = &mut ws.states[..n * dd];
        states[..dd].copy_from_slice(x);
        if inverse {
            if let Some(b) = &self.bias {
                states[..dd]
                    .iter_mut()
                    .zip(b)
                    .for_each(|(xi, bi)| *xi -= scale * bi);
            }
        }
        // states[j] is the input of the j-th applied sublayer
        for j in 1..n {
            let (done, rest) = states.split_at_mut(j * dd);
            rest[..dd].copy_from_slice(&done[(j - 1) * dd..]);
            let (k, sign) = self.step(j - 1, inverse);
            self.sublayer(k, sign * scale, &mut rest[..dd]);
        }

        let mut scalebar = 0.0;
        let (gs, gbias) = grad.split_at_mut(n * sl);
        if !inverse {
            if let Some(b) = &self.bias {
                for i in 0..dd {
                    gbias[i] += scale * xbar[i];
                    scalebar += xbar[i] * b[i];
                }
            }
        }
        ensure(&mut ws.out, d);
        for j in (0..n).rev() {
            let (k, sign) = self.step(j, inverse);
            let coef = sign * scale;
            let dir = self.dir(k);
            let state = &ws.states[j * dd..(j + 1) * dd];
            let src_in = src_of(state, d, dir);
            let (u, sbar) = halves(xbar, d, dir);
            // S is symmetric, so Sᵀu = Su.
            sym_mul_add(&self.s[k], d, u, coef, sbar);
            sym_outer_add(&mut gs[k * sl..(k + 1) * sl], d, u, src_in, coef);
            ws.out[..d].fill(0.0);
            sym_mul_add(&self.s[k], d, src_in, 1.0, &mut ws.out[..d]);
            scalebar += sign * dot(u, &ws.out[..d]);
        }
        if inverse {
            if let Some(b) = &self.bias {
                for i in 0..dd {
                    gbias[i] -= scale * xbar[i];
                    scalebar -= xbar[i] * b[i];
                }
            }
        }
        scalebar
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        for s in &self.s {
            out.extend_from_slice(s);
        }
        if let Some(b) = &self.bias {
            out.extend_from_slice(b);
        }
    }

    fn read_params(&mut self, src: &[f64]) -> usize {
        let mut at = 0;
        for s in &mut self.s {
            let n = s.len();
            s.copy_from_slice(&src[at..at + n]);
            at += n;
        }
        if let Some(b) = &mut self.bias {
            let n = b.len();
            b.copy_from_slice(&src[at..at + n]);
            at += n;
        }
        at
    }
}

/// `[I, h·diag(a)σ(· + ct + b); 0, I]` (or its lower counterpart).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationModule {
    pub a: Vec<f64>,
    /// Shift inside the activation; absent in the original networks.
    pub b: Option<Vec<f64>>,
    /// Time coefficients; present only in non-autonomous networks.
    pub c: Option<Vec<f64>>,
    pub direction: Direction,
}

impl ActivationModule {
    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn param_count(&self) -> usize {
        self.a.len() + self.b.as_ref().map_or(0, Vec::len) + self.c.as_ref().map_or(0, Vec::len)
    }

    #[inline(always)]
    fn preact(&self, j: usize, src: f64, t: f64) -> f64 {
        let mut z = src;
        if let Some(b) = &self.b {
            z += b[j];
        }
        if let Some(c) = &self.c {
            z += c[j] * t;
        }
        z
    }

    fn forward(&self, act: Activation, h: f64, t: f64, x: &mut [f64]) {
        let d = self.dim();
        let (dst, src) = halves(x, d, self.direction);
        for j in 0..d {
            dst[j] += h * self.a[j] * act.value(self.preact(j, src[j], t));
        }
    }

    fn forward_split(&self, act: Activation, h: f64, t: f64, base: &[f64], off: &mut [f64]) {
        let d = self.dim();
        let bsrc = src_of(base, d, self.direction);
        let (odst, osrc) = halves(off, d, self.direction);
        for j in 0..d {
            odst[j] += h * self.a[j] * act.value(self.preact(j, bsrc[j] + osrc[j], t));
        }
    }

    fn jvp(&self, act: Activation, h: f64, t: f64, x: &[f64], dx: &mut [f64]) {
        let d = self.dim();
        let src = src_of(x, d, self.direction);
        let (ddst, dsrc) = halves(dx, d, self.direction);
        for j in 0..d {
            ddst[j] += h * self.a[j] * act.derivative(self.preact(j, src[j], t)) * dsrc[j];
        }
    }

    /// Evaluates `σ` and `σ′` at the pre-activations of input `x`.
    fn activations(
        &self,
        act: Activation,
        t: f64,
        x: &[f64],
        sig: &mut Vec<f64>,
        dsig: &mut Vec<f64>,
    ) {
        let d = self.dim();
        let src = src_of(x, d, self.direction);
        sig.clear();
        dsig.clear();
        for j in 0..d {
            let (v, dv) = act.value_and_derivative(self.preact(j, src[j], t));
            sig.push(v);
            dsig.push(dv);
        }
    }

    fn vjp(
        &self,
        act: Activation,
        h: f64,
        t: f64,
        x: &[f64],
        xbar: &mut [f64],
        grad: &mut [f64],
        ws: &mut Scratch,
    ) -> (f64, f64) {
        let (mut sig, mut dsig) = (std::mem::take(&mut ws.s), std::mem::take(&mut ws.w));
        self.activations(act, t, x, &mut sig, &mut dsig);
        let out = self.vjp_cached(h, t, xbar, grad, &sig, &dsig);
        ws.s = sig;
        ws.w = dsig;
        out
    }

    /// Adjoint given `σ` and `σ′` at the module input.
    fn vjp_cached(
        &self,
        h: f64,
        t: f64,
        xbar: &mut [f64],
        grad: &mut [f64],
        sig: &[f64],
        dsig: &[f64],
    ) -> (f64, f64) {
        let d = self.dim();
        let (u, sbar) = halves(xbar, d, self.direction);
        let (ga, rest) = grad.split_at_mut(d);
        let (gb, gc) = if self.b.is_some() {
            rest.split_at_mut(d)
        } else {
            rest.split_at_mut(0)
        };
        let (mut hbar, mut tbar) = (0.0, 0.0);
        for j in 0..d {
            hbar += u[j] * self.a[j] * sig[j];
            ga[j] += h * u[j] * sig[j];
            let r = h * u[j] * self.a[j] * dsig[j];
            if self.b.is_some() {
                gb[j] += r;
            }
            if let Some(c) = &self.c {
                gc[j] += r * t;
                tbar += r * c[j];
            }
            sbar[j] += r;
        }
        (hbar, tbar)
    }

    fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.a);
        if let Some(b) = &self.b {
            out.extend_from_slice(b);
        }
        if let Some(c) = &self.c {
            out.extend_from_slice(c);
        }
    }

    fn read_params(&mut self, src: &[f64]) -> usize {
        let d = self.a.len();
        self.a.copy_from_slice(&src[..d]);
        let mut at = d;
        for v in [&mut self.b, &mut self.c].into_iter().flatten() {
            v.copy_from_slice(&src[at..at + d]);
            at += d;
        }
        at
    }
}

/// `v⁻¹ ∘ w(h) ∘ v`: an activation shear conjugated by an `h`-independent
/// linear module whose inverse shares its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugatedBlock {
    pub linear: LinearModule,
    pub activation: ActivationModule,
}

/// One element of a network.
#[derive(Debug, Clone, PartialEq)]
pub enum Module {
    Gradient(GradientModule),
    /// `h`-scaled linear module (original linear-activation networks).
    Linear(LinearModule),
    Activation(ActivationModule),
    Conjugated(ConjugatedBlock),
}

impl Module {
    pub fn param_count(&self) -> usize {
        match self {
            Module::Gradient(g) => g.param_count(),
            Module::Linear(l) => l.param_count(),
            Module::Activation(a) => a.param_count(),
            Module::Conjugated(c) => c.linear.param_count() + c.activation.param_count(),
        }
    }

    pub(crate) fn forward(&self, act: Activation, h: f64, t: f64, x: &mut [f64], ws: &mut Scratch) {
        match self {
            Module::Gradient(g) => g.forward(act, h, t, x, ws),
            Module::Linear(l) => l.run(h, false, x),
            Module::Activation(a) => a.forward(act, h, t, x),
            Module::Conjugated(c) => {
                c.linear.run(1.0, false, x);
                c.activation.forward(act, h, t, x);
                c.linear.run(1.0, true, x);
            }
        }
    }

    pub(crate) fn forward_split(
        &self,
        act: Activation,
        h: f64,
        t: f64,
        base: &mut [f64],
        off: &mut [f64],
        ws: &mut Scratch,
    ) {
        match self {
            Module::Gradient(g) => g.forward_split(act, h, t, base, off, ws),
            Module::Linear(l) => l.forward_split_scaled(h, base, off, ws),
            Module::Activation(a) => a.forward_split(act, h, t, base, off),
            Module::Conjugated(c) => {
                debug_assert!(c.linear.bias.is_none());
                c.linear.run_linear(1.0, false, base);
                c.linear.run_linear(1.0, false, off);
                c.activation.forward_split(act, h, t, base, off);
                c.linear.run_linear(1.0, true, base);
                c.linear.run_linear(1.0, true, off);
            }
        }
    }

    pub(crate) fn jvp(
        &self,
        act: Activation,
        h: f64,
        t: f64,
        x: &[f64],
        dx: &mut [f64],
        ws: &mut Scratch,
    ) {
        match self {
            Module::Gradient(g) => g.jvp(act, h, t, x, dx, ws),
            Module::Linear(l) => l.run_linear(h, false, dx),
            Module::Activation(a) => a.jvp(act, h, t, x, dx),
            Module::Conjugated(c) => {
                let mut x1 = std::mem::take(&mut ws.x1);
                x1.clear();
                x1.extend_from_slice(x);
                c.linear.run(1.0, false, &mut x1);
                c.linear.run_linear(1.0, false, dx);
                c.activation.jvp(act, h, t, &x1, dx);
                c.linear.run_linear(1.0, true, dx);
                ws.x1 = x1;
            }
        }
    }

    /// Back-propagates `xbar` (adjoint of the output on entry, of the input
    /// on exit) and accumulates into `grad`, this module's slice of the
    /// flat gradient. Returns `(∂/∂h, ∂/∂t)` of `⟨xbar_out, module(x)⟩`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn vjp(
        &self,
        act: Activation,
        h: f64,
        t: f64,
        x: &[f64],
        xbar: &mut [f64],
        grad: &mut [f64],
        ws: &mut Scratch,
    ) -> (f64, f64) {
        match self {
            Module::Gradient(g) => g.vjp(act, h, t, x, xbar, grad, ws),
            Module::Linear(l) => (l.vjp(h, false, x, xbar, grad, ws), 0.0),
            Module::Activation(a) => a.vjp(act, h, t, x, xbar, grad, ws),
            Module::Conjugated(c) => {
                let mut x1 = std::mem::take(&mut ws.x1);
                let mut x2 = std::mem::take(&mut ws.x2);
                let (mut sig, mut dsig) = (std::mem::take(&mut ws.s), std::mem::take(&mut ws.w));
                x1.clear();
                x1.extend_from_slice(x);
                c.linear.run(1.0, false, &mut x1);
                c.activation.activations(act, t, &x1, &mut sig, &mut dsig);
                x2.clear();
                x2.extend_from_slice(&x1);
                let d = c.activation.dim();
                let (dst, _) = halves(&mut x2, d, c.activation.direction);
                for j in 0..d {
                    dst[j] += h * c.activation.a[j] * sig[j];
                }

                let nl = c.linear.param_count();
                let (gl, ga) = grad.split_at_mut(nl);
                c.linear.vjp(1.0, true, &x2, xbar, gl, ws);
                let out = c.activation.vjp_cached(h, t, xbar, ga, &sig, &dsig);
                c.linear.vjp(1.0, false, x, xbar, gl, ws);
                ws.x1 = x1;
                ws.x2 = x2;
                ws.s = sig;
                ws.w = dsig;
                out
            }
        }
    }

    pub(crate) fn write_params(&self, out: &mut Vec<f64>) {
        match self {
            Module::Gradient(g) => g.write_params(out),
            Module::Linear(l) => l.write_params(out),
            Module::Activation(a) => a.write_params(out),
            Module::Conjugated(c) => {
                c.linear.write_params(out);
                c.activation.write_params(out);
            }
        }
    }

    pub(crate) fn read_params(&mut self, src: &[f64]) -> usize {
        match self {
            Module::Gradient(g) => g.read_params(src),
            Module::Linear(l) => l.read_params(src),
            Module::Activation(a) => a.read_params(src),
            Module::Conjugated(c) => {
                let n = c.linear.read_params(src);
                n + c.activation.read_params(&src[n..])
            }
        }
    }
}
