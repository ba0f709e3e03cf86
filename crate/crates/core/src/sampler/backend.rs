//! Timing backends: reference kernels, a synthetic clock and shared libraries.

use super::precondition::{operand_regions, Access, CachePrecondition, Region, Toucher};
use crate::error::{Error, Result};
use crate::kernels::{execute, BufferStore, Call, Kernel, MachineSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::ffi::c_void;
use std::time::Instant;

/// Clock used to time a call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerKind {
    Monotonic,
    /// Hardware cycle counter, converted with the machine base frequency.
    CycleCounter,
}

/// Reads the time-stamp counter; falls back to nanoseconds elsewhere.
pub fn read_cycle_counter() -> u64 {
    #[cfg(target_arch = "x86_64")]
    {
        // SAFETY: rdtsc has no preconditions on x86_64.
        unsafe { core::arch::x86_64::_rdtsc() }
    }
    #[cfg(not(target_arch = "x86_64"))]
    {
        use std::sync::OnceLock;
        static START: OnceLock<Instant> = OnceLock::new();
        START.get_or_init(Instant::now).elapsed().as_nanos() as u64
    }
}

/// Something that can run calls, report their duration and set up caches.
pub trait Backend {
    /// Identifier recorded in model files.
    fn id(&self) -> String;
    /// Runs the call once and returns its duration in seconds.
    fn run(&mut self, call: &Call, store: &mut BufferStore) -> Result<f64>;
    /// Establishes a cache state.
    fn apply(&mut self, pre: &CachePrecondition, store: &mut BufferStore) -> Result<()>;
    /// Size of the remote access that evicts all cached operands.
    fn flush_bytes(&self) -> u64;
    /// Whether calls need allocated operand buffers.
    fn needs_memory(&self) -> bool {
        true
    }
}

struct Stopwatch {
    timer: TimerKind,
    frequency: f64,
}

impl Stopwatch {
    fn time(&self, f: impl FnOnce() -> Result<()>) -> Result<f64> {
        match self.timer {
            TimerKind::Monotonic => {
                let t = Instant::now();
                f()?;
                Ok(t.elapsed().as_secs_f64())
            }
            TimerKind::CycleCounter => {
                let c = read_cycle_counter();
                f()?;
                Ok(read_cycle_counter().wrapping_sub(c) as f64 / self.frequency)
            }
        }
    }
}

fn default_flush(machine: &MachineSpec) -> u64 {
    2 * machine.last_level_cache().map_or(32 << 20, |c| c.capacity)
}

/// Times the naive reference kernels.
pub struct ReferenceBackend {
    watch: Stopwatch,
    toucher: Toucher,
    flush: u64,
}

impl ReferenceBackend {
    pub fn new(machine: &MachineSpec, timer: TimerKind) -> Self {
        let flush = default_flush(machine);
        ReferenceBackend {
            watch: Stopwatch {
                timer,
                frequency: machine.base_frequency,
            },
            toucher: Toucher::new(flush as usize, machine.line_size() as usize),
            flush,
        }
    }

    pub fn toucher(&self) -> &Toucher {
        &self.toucher
    }
}

impl Backend for ReferenceBackend {
    fn id(&self) -> String {
        "reference".into()
    }

    fn run(&mut self, call: &Call, store: &mut BufferStore) -> Result<f64> {
        self.watch.time(|| execute(call, store).map(|_| ()))
    }

    fn apply(&mut self, pre: &CachePrecondition, store: &mut BufferStore) -> Result<()> {
        self.toucher.apply(pre, store)
    }

    fn flush_bytes(&self) -> u64 {
        self.flush
    }
}

type CostFn = Box<dyn Fn(&Call) -> f64 + Send>;

enum Cost {
    Custom(CostFn),
    Roofline {
        overhead: f64,
        flop_rate: f64,
        bandwidth: f64,
    },
}

/// LRU list of regions; a region is resident when the bytes of other
/// regions touched since its last use plus its own size fit the capacity.
struct SimCache {
    capacity: u64,
    speedup: f64,
    lru: VecDeque<(Option<Region>, u64)>,
}

impl SimCache {
    fn touch(&mut self, region: Option<Region>, bytes: u64) -> bool {
        let mut hit = false;
        if let Some(r) = &region {
            if let Some(pos) = self.lru.iter().position(|(k, _)| k.as_ref() == Some(r)) {
                let distance = self.lru.iter().take(pos).map(|e| e.1).sum::<u64>();
                hit = distance + bytes <= self.capacity;
                self.lru.remove(pos);
            }
        }
        self.lru.push_front((region, bytes));
        let mut total = 0;
        let mut keep = 0;
        for e in &self.lru {
            total += e.1;
            keep += 1;
            if total > self.capacity {
                break;
            }
        }
        self.lru.truncate(keep);
        hit
    }
}

/// Deterministic clock computed from the call instead of measured.
///
/// Zero-size calls take no time.
pub struct SyntheticBackend {
    cost: Cost,
    noise: f64,
    rng: ChaCha8Rng,
    cache: Option<SimCache>,
    flush: u64,
    /// Number of `run` invocations.
    pub runs: usize,
    /// Number of `apply` invocations.
    pub applies: usize,
}

impl SyntheticBackend {
    pub fn new(cost: impl Fn(&Call) -> f64 + Send + 'static) -> Self {
        SyntheticBackend {
            cost: Cost::Custom(Box::new(cost)),
            noise: 0.0,
            rng: ChaCha8Rng::seed_from_u64(0),
            cache: None,
            flush: 64 << 20,
            runs: 0,
            applies: 0,
        }
    }

    /// Time = overhead + flops / (0.9 peak) + data movement / bandwidth.
    pub fn roofline(machine: &MachineSpec, threads: u32) -> Self {
        let mut b = Self::new(|_| 0.0);
        b.cost = Cost::Roofline {
            overhead: 1e-7,
            flop_rate: 0.9 * machine.peak_flops(threads),
            bandwidth: machine.peak_bandwidth,
        };
        b.flush = default_flush(machine);
        b
    }

    /// Multiplies every time by an independent factor in `[1 - rel, 1 + rel)`.
    pub fn with_noise(mut self, rel: f64, seed: u64) -> Self {
        self.noise = rel;
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self
    }

    /// Tracks residency; resident data moves `speedup` times faster.
    pub fn with_cache(mut self, capacity: u64, speedup: f64) -> Self {
        self.cache = Some(SimCache {
            capacity,
            speedup,
            lru: VecDeque::new(),
        });
        self.flush = 2 * capacity;
        self
    }

    /// Noise-free duration of a call given the fraction of resident elements.
    fn base_time(&self, call: &Call, resident: f64) -> Result<f64> {
        if call.is_empty() {
            return Ok(0.0);
        }
        Ok(match &self.cost {
            Cost::Custom(f) => f(call),
            Cost::Roofline {
                overhead,
                flop_rate,
                bandwidth,
            } => {
                let bytes = 8.0 * call.data_movement()? as f64;
                let speedup = self.cache.as_ref().map_or(1.0, |c| c.speedup);
                let mem = bytes * (1.0 - resident) / bandwidth;
                let cached = bytes * resident / (bandwidth * speedup);
                overhead + call.flop_count()? as f64 / flop_rate + mem + cached
            }
        })
    }
}

impl Backend for SyntheticBackend {
    fn id(&self) -> String {
        if self.noise > 0.0 {
            "synthetic-noise".into()
        } else {
            "synthetic".into()
        }
    }

    fn run(&mut self, call: &Call, _store: &mut BufferStore) -> Result<f64> {
        call.validate()?;
        self.runs += 1;
        let mut resident = 0.0;
        if let Some(cache) = &mut self.cache {
            let regions = operand_regions(call)?;
            let total: usize = regions.iter().map(|r| r.elements()).sum();
            let mut hit = 0;
            for r in regions {
                let (e, b) = (r.elements(), r.bytes());
                if cache.touch(Some(r), b) {
                    hit += e;
                }
            }
            if total > 0 {
                resident = hit as f64 / total as f64;
            }
        }
        let t = self.base_time(call, resident)?;
        if self.noise > 0.0 && t > 0.0 {
            let u: f64 = self.rng.random_range(-1.0..1.0);
            return Ok(t * (1.0 + self.noise * u));
        }
        Ok(t)
    }

    fn apply(&mut self, pre: &CachePrecondition, _store: &mut BufferStore) -> Result<()> {
        self.applies += 1;
        if let Some(cache) = &mut self.cache {
            for a in &pre.accesses {
                match a {
                    Access::Operand(r) => cache.touch(Some(r.clone()), r.bytes()),
                    Access::Remote(b) => cache.touch(None, *b),
                };
            }
        }
        Ok(())
    }

    fn flush_bytes(&self) -> u64 {
        self.flush
    }

    fn needs_memory(&self) -> bool {
        false
    }
}

/// Kernels from a shared library with the Fortran calling convention:
/// every argument by reference, lowercase symbol with a trailing underscore,
/// hidden character lengths appended.
pub struct DylibBackend {
    lib: libloading::Library,
    path: String,
    watch: Stopwatch,
    toucher: Toucher,
    flush: u64,
}

type P = *mut c_void;

macro_rules! call_ptrs {
    ($f:expr, $ret:ty, $a:expr, $($i:literal)*) => {{
        let f: unsafe extern "C" fn($(call_ptrs!(@ty $i)),*) -> $ret = std::mem::transmute($f);
        f($($a[$i]),*)
    }};
    (@ty $i:literal) => { P };
}

/// Invokes a symbol with `args.len()` pointer-sized arguments.
unsafe fn invoke<R: Default>(sym: *const c_void, args: &[P]) -> Result<R>
where
    R: Copy,
{
    macro_rules! arms {
        ($($n:literal => [$($i:literal)*]),*) => {
            match args.len() {
                $($n => Ok(call_ptrs!(sym, R, args, $($i)*)),)*
                n => Err(Error::Backend(format!("unsupported argument count {n}"))),
            }
        };
    }
    arms!(
        5 => [0 1 2 3 4],
        6 => [0 1 2 3 4 5],
        7 => [0 1 2 3 4 5 6],
        8 => [0 1 2 3 4 5 6 7],
        9 => [0 1 2 3 4 5 6 7 8],
        10 => [0 1 2 3 4 5 6 7 8 9],
        11 => [0 1 2 3 4 5 6 7 8 9 10],
        12 => [0 1 2 3 4 5 6 7 8 9 10 11],
        13 => [0 1 2 3 4 5 6 7 8 9 10 11 12],
        14 => [0 1 2 3 4 5 6 7 8 9 10 11 12 13],
        15 => [0 1 2 3 4 5 6 7 8 9 10 11 12 13 14],
        16 => [0 1 2 3 4 5 6 7 8 9 10 11 12 13 14 15],
        17 => [0 1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16],
        18 => [0 1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16 17],
        19 => [0 1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16 17 18],
        20 => [0 1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16 17 18 19]
    )
}

impl DylibBackend {
    /// Loads the library after exporting the thread count through `thread_env`.
    pub fn load(path: &str, machine: &MachineSpec, threads: u32, thread_env: Option<&str>) -> Result<Self> {
        if let Some(var) = thread_env {
            std::env::set_var(var, threads.to_string());
        }
        // SAFETY: loading runs library initializers; the caller chose the library.
        let lib = unsafe { libloading::Library::new(path) }
            .map_err(|e| Error::Backend(format!("cannot load {path}: {e}")))?;
        let flush = default_flush(machine);
        Ok(DylibBackend {
            lib,
            path: path.to_string(),
            watch: Stopwatch {
                timer: TimerKind::Monotonic,
                frequency: machine.base_frequency,
            },
            toucher: Toucher::new(flush as usize, machine.line_size() as usize),
            flush,
        })
    }

    pub fn with_timer(mut self, timer: TimerKind) -> Self {
        self.watch.timer = timer;
        self
    }
}

enum Slot {
    Char(u8),
    Int(i32),
    Double(f64),
    Ptr(P),
    Ints(Vec<i32>, String, usize),
}

impl Backend for DylibBackend {
    fn id(&self) -> String {
        self.path.clone()
    }

    fn run(&mut self, call: &Call, store: &mut BufferStore) -> Result<f64> {
        call.validate()?;
        let layouts = call.layouts()?;
        for l in &layouts {
            let len = store.get(&l.operand.buffer)?.len();
            if l.span() > 0 && l.operand.offset + l.span() > len {
                return Err(Error::OutOfBounds {
                    arg: l.arg.into(),
                    buffer: l.operand.buffer.to_string(),
                    needed: l.operand.offset + l.span(),
                    len,
                });
            }
        }
        let name = format!("{}_", call.kernel.name());
        // SAFETY: the symbol is only reinterpreted as a C function pointer.
        let sym: libloading::Symbol<*const c_void> = unsafe { self.lib.get(name.as_bytes()) }
            .map_err(|e| Error::Backend(format!("{name}: {e}")))?;
        let sym = *sym;
        let desc = call.descriptor();
        let mut slots: Vec<Slot> = Vec::with_capacity(call.args.len());
        let mut flags = 0;
        let mut data = layouts.iter();
        for (spec, arg) in desc.args.iter().zip(&call.args) {
            use crate::kernels::Arg;
            let slot = match arg {
                Arg::Flag(f) => {
                    flags += 1;
                    Slot::Char(f.as_bytes()[0])
                }
                Arg::Size(s) | Arg::Ld(s) => Slot::Int(*s as i32),
                Arg::Inc(i) => Slot::Int(*i as i32),
                Arg::Scalar(v) => Slot::Double(*v),
                Arg::Info => Slot::Int(0),
                Arg::Data(o) => {
                    let l = data.next().expect("layout per data argument");
                    let buf = store.get_mut(&o.buffer)?;
                    if spec.name == "ipiv" {
                        let n = l.span();
                        let v = buf[o.offset..o.offset + n].iter().map(|x| *x as i32).collect();
                        Slot::Ints(v, o.buffer.to_string(), o.offset)
                    } else {
                        // SAFETY: offset + span was bounds-checked above.
                        Slot::Ptr(unsafe { buf.as_mut_ptr().add(o.offset) } as P)
                    }
                }
            };
            slots.push(slot);
        }
        let mut ptrs: Vec<P> = slots
            .iter_mut()
            .map(|s| match s {
                Slot::Char(c) => c as *mut u8 as P,
                Slot::Int(i) => i as *mut i32 as P,
                Slot::Double(d) => d as *mut f64 as P,
                Slot::Ptr(p) => *p,
                Slot::Ints(v, _, _) => v.as_mut_ptr() as P,
            })
            .collect();
        ptrs.extend(std::iter::repeat_n(1usize as P, flags));
        let is_dot = call.kernel == Kernel::Ddot;
        let secs = self.watch.time(|| {
            // SAFETY: arguments follow the routine's reference signature.
            unsafe {
                if is_dot {
                    invoke::<f64>(sym, &ptrs).map(|_| ())
                } else {
                    invoke::<()>(sym, &ptrs)
                }
            }
        })?;
        for s in slots {
            if let Slot::Ints(v, buffer, offset) = s {
                let buf = store.get_mut(&buffer)?;
                for (i, x) in v.into_iter().enumerate() {
                    buf[offset + i] = x as f64;
                }
            }
        }
        Ok(secs)
    }

    fn apply(&mut self, pre: &CachePrecondition, store: &mut BufferStore) -> Result<()> {
        self.toucher.apply(pre, store)
    }

    fn flush_bytes(&self) -> u64 {
        self.flush
    }
}

/// Builds a backend from its command-line name: `reference`, `synthetic`,
/// `synthetic-cache`, `synthetic-noise` or a shared-library path (optionally `path:ENV_VAR`).
pub fn backend_from_spec(
    spec: &str,
    machine: &MachineSpec,
    threads: u32,
    seed: u64,
) -> Result<Box<dyn Backend>> {
    Ok(match spec {
        "reference" => Box::new(ReferenceBackend::new(machine, TimerKind::Monotonic)),
        "reference-cycles" => Box::new(ReferenceBackend::new(machine, TimerKind::CycleCounter)),
        "synthetic" => Box::new(SyntheticBackend::roofline(machine, threads)),
        "synthetic-cache" => {
            let llc = machine.last_level_cache().map_or(8 << 20, |c| c.capacity);
            Box::new(SyntheticBackend::roofline(machine, threads).with_cache(llc, 4.0))
        }
        "synthetic-noise" => {
            Box::new(SyntheticBackend::roofline(machine, threads).with_noise(0.02, seed))
        }
        path => {
            let (path, env) = match path.rsplit_once(':') {
                Some((p, e)) if !e.contains('/') => (p, Some(e)),
                _ => (path, None),
            };
            Box::new(DylibBackend::load(path, machine, threads, env)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Operand;

    fn gemm(n: usize) -> Call {
        Call::from_parts(
            Kernel::Dgemm,
            &["N", "N"],
            &[n, n, n],
            &[1.0, 1.0],
            vec![Operand::new("A", 0), Operand::new("B", 0), Operand::new("C", 0)],
            &[n.max(1); 3],
            &[],
        )
        .unwrap()
    }

    #[test]
    fn synthetic_zero_size_is_free() {
        let m = MachineSpec::builtin("haswell-e5-2680v3").unwrap();
        let mut b = SyntheticBackend::roofline(&m, 1);
        let mut st = BufferStore::new();
        assert_eq!(b.run(&gemm(0), &mut st).unwrap(), 0.0);
        assert!(b.run(&gemm(100), &mut st).unwrap() > 0.0);
    }

    #[test]
    fn synthetic_cache_distinguishes_warm_and_cold() {
        let m = MachineSpec::builtin("haswell-e5-2680v3").unwrap();
        let mut b = SyntheticBackend::roofline(&m, 1).with_cache(1 << 20, 4.0);
        let mut st = BufferStore::new();
        let call = gemm(64);
        let cold = b.run(&call, &mut st).unwrap();
        let warm = b.run(&call, &mut st).unwrap();
        assert!(warm < cold);
        b.apply(&CachePrecondition::remote(2 << 20), &mut st).unwrap();
        assert_eq!(b.run(&call, &mut st).unwrap(), cold);
    }

    #[test]
    fn dylib_matches_reference_when_available() {
        let path = "/usr/lib/x86_64-linux-gnu/libopenblas.so.0";
        if !std::path::Path::new(path).exists() {
            return;
        }
        let m = MachineSpec::builtin("haswell-e5-2680v3").unwrap();
        let mut lib = DylibBackend::load(path, &m, 1, Some("OPENBLAS_NUM_THREADS")).unwrap();
        let n = 7;
        let mut st = BufferStore::new();
        st.insert("A", (0..n * n).map(|i| (i % 5) as f64 - 2.0).collect());
        st.insert("B", (0..n * n).map(|i| (i % 3) as f64 + 0.5).collect());
        st.insert("C", vec![1.0; n * n]);
        let mut st2 = st.clone();
        lib.run(&gemm(n), &mut st).unwrap();
        execute(&gemm(n), &mut st2).unwrap();
        for (x, y) in st.get("C").unwrap().iter().zip(st2.get("C").unwrap()) {
            assert!((x - y).abs() < 1e-12);
        }
        // LAPACK routine with an integer output array.
        let call = Call::from_parts(
            Kernel::Dgetrf,
            &[],
            &[n, n],
            &[],
            vec![Operand::new("A", 0), Operand::new("p", 0)],
            &[n],
            &[],
        )
        .unwrap();
        st.alloc("p", n);
        st2.alloc("p", n);
        lib.run(&call, &mut st).unwrap();
        execute(&call, &mut st2).unwrap();
        assert_eq!(st.get("p").unwrap(), st2.get("p").unwrap());
        for (x, y) in st.get("A").unwrap().iter().zip(st2.get("A").unwrap()) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
