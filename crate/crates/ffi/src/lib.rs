//! C interface to the simulator.
//!
//! Every function returns an [`NbStatus`]; on anything but `NB_STATUS_OK` a
//! message is available from [`nb_last_error`] on the same thread. Bit arrays
//! are `uint8_t` with one bit per byte (0 or 1). Handles are opaque and must
//! be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use noisy_bcast::codes::CodeSpec;
use noisy_bcast::core_protocols::{run_and, run_equality_test};
use noisy_bcast::field::smallest_prime_at_least;
use noisy_bcast::large_alphabet::{run_large_alphabet, FieldConfig};
use noisy_bcast::learn_input::run_learn_input;
use noisy_bcast::symmetric::{run_hamming_weight, Interval, ThetaTable};
use noisy_bcast::{
    required_gamma, BitString, Channel, ChannelConfig, Classification, Error, ReceivedWord,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    LengthMismatch = 4,
    DecodeFailed = 5,
    Invariant = 6,
    Panic = 7,
}

/// Classification of an input-learning run.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NbOutcome {
    Success = 0,
    FailWithKnowledge = 1,
    FailWithoutKnowledge = 2,
}

/// A channel: `n` processors, erasure probability, repetitions, seed and round counter.
pub struct NbSimulator {
    channel: Channel,
}

/// A binary code for `k`-bit messages.
pub struct NbCode {
    spec: CodeSpec,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(err: Error) -> NbStatus {
    let status = match err {
        Error::InvalidConfig(_) => NbStatus::InvalidConfig,
        Error::LengthMismatch { .. } => NbStatus::LengthMismatch,
        Error::InvalidArgument(_) => NbStatus::InvalidArgument,
        Error::DecodeFailed => NbStatus::DecodeFailed,
        Error::Invariant(_) => NbStatus::Invariant,
    };
    set_error(err.to_string());
    status
}

fn null(what: &str) -> NbStatus {
    set_error(format!("{what} is null"));
    NbStatus::NullPointer
}

fn guard(f: impl FnOnce() -> Result<(), NbStatus>) -> NbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            NbStatus::Panic
        }
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], NbStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], NbStatus> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a>(p: *mut NbSimulator) -> Result<&'a mut NbSimulator, NbStatus> {
    p.as_mut().ok_or_else(|| null("simulator"))
}

fn bools(bytes: &[u8]) -> Result<Vec<bool>, NbStatus> {
    bytes
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(fail(Error::InvalidArgument(format!(
                "bit value {b} is not 0 or 1"
            )))),
        })
        .collect()
}

/// Message of the last failed call on this thread, or null. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn nb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `out` must be a valid pointer to write a handle to.
#[no_mangle]
pub unsafe extern "C" fn nb_simulator_new(
    n: usize,
    p: f64,
    gamma: u32,
    seed: u64,
    out: *mut *mut NbSimulator,
) -> NbStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let cfg = ChannelConfig::new(n, p, gamma, seed).map_err(fail)?;
        let channel = Channel::new(cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(NbSimulator { channel }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`nb_simulator_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nb_simulator_free(sim: *mut NbSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Physical rounds consumed so far (0 for a null handle).
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nb_simulator_rounds_used(sim: *const NbSimulator) -> u64 {
    sim.as_ref().map_or(0, |s| s.channel.rounds_used())
}

/// AND of `n` bits; `out` receives `n` outputs.
///
/// # Safety
/// `bits` and `out` must hold `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn nb_run_and(
    sim: *mut NbSimulator,
    bits: *const u8,
    n: usize,
    out: *mut u8,
) -> NbStatus {
    guard(|| {
        let s = handle(sim)?;
        let bits = bools(input(bits, n, "bits")?)?;
        let out = output(out, n, "out")?;
        let res = run_and(&mut s.channel, &bits).map_err(fail)?;
        for (o, r) in out.iter_mut().zip(res) {
            *o = r as u8;
        }
        Ok(())
    })
}

/// Equality test on `n` strings of `k` bits, row-major in `inputs`; `out` receives `n` outputs.
///
/// # Safety
/// `inputs` must hold `n * k` bytes and `out` `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn nb_run_equality_test(
    sim: *mut NbSimulator,
    inputs: *const u8,
    n: usize,
    k: usize,
    out: *mut u8,
) -> NbStatus {
    guard(|| {
        let s = handle(sim)?;
        let flat = bools(input(inputs, n * k, "inputs")?)?;
        let out = output(out, n, "out")?;
        let spec = CodeSpec::concatenated(k).map_err(fail)?;
        let strings: Vec<BitString> = flat.chunks(k.max(1)).map(BitString::from_bools).collect();
        let res = run_equality_test(&mut s.channel, &spec, &strings).map_err(fail)?;
        for (o, r) in out.iter_mut().zip(res) {
            *o = r as u8;
        }
        Ok(())
    })
}

/// Input learning. `outputs` receives `n * n` bytes (row `i` is processor `i`'s
/// reconstruction), `verified` `n` flags, `outcome` the classification.
///
/// # Safety
/// Buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn nb_run_learn_input(
    sim: *mut NbSimulator,
    bits: *const u8,
    n: usize,
    outputs: *mut u8,
    verified: *mut u8,
    outcome: *mut NbOutcome,
) -> NbStatus {
    guard(|| {
        let s = handle(sim)?;
        let bits = bools(input(bits, n, "bits")?)?;
        let outputs = output(outputs, n * n, "outputs")?;
        let verified = output(verified, n, "verified")?;
        let outcome = outcome.as_mut().ok_or_else(|| null("outcome"))?;
        let res = run_learn_input(&mut s.channel, &bits).map_err(fail)?;
        for (row, x) in outputs.chunks_mut(n.max(1)).zip(&res.outputs) {
            for (o, b) in row.iter_mut().zip(x.iter()) {
                *o = b as u8;
            }
        }
        for (o, &v) in verified.iter_mut().zip(&res.verified) {
            *o = v as u8;
        }
        *outcome = match res.classification {
            Classification::Success => NbOutcome::Success,
            Classification::FailWithKnowledge => NbOutcome::FailWithKnowledge,
            Classification::FailWithoutKnowledge => NbOutcome::FailWithoutKnowledge,
        };
        Ok(())
    })
}

/// Large-alphabet learning over the prime `q` (0 selects the smallest prime `>= n^6`).
/// `outputs` receives `n * n` values, `solved` `n` uniqueness flags.
///
/// # Safety
/// Buffers must have the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn nb_run_large_alphabet(
    sim: *mut NbSimulator,
    q: u64,
    inputs: *const u64,
    n: usize,
    outputs: *mut u64,
    solved: *mut u8,
) -> NbStatus {
    guard(|| {
        let s = handle(sim)?;
        let inputs = input(inputs, n, "inputs")?;
        let outputs = output(outputs, n * n, "outputs")?;
        let solved = output(solved, n, "solved")?;
        let field = if q == 0 {
            FieldConfig::for_processors(n)
        } else {
            FieldConfig::new(q, n)
        }
        .map_err(fail)?;
        let res = run_large_alphabet(&mut s.channel, field, inputs).map_err(fail)?;
        for (row, x) in outputs.chunks_mut(n.max(1)).zip(&res.outputs) {
            row.copy_from_slice(x);
        }
        for (o, &v) in solved.iter_mut().zip(&res.solved) {
            *o = v as u8;
        }
        Ok(())
    })
}

/// Hamming weight with the calibrated interval scale; `out` receives `n` weights, -1 for FAIL.
///
/// # Safety
/// `bits` and `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn nb_run_hamming_weight(
    sim: *mut NbSimulator,
    bits: *const u8,
    n: usize,
    out: *mut i64,
) -> NbStatus {
    guard(|| {
        let s = handle(sim)?;
        let bits = bools(input(bits, n, "bits")?)?;
        let out = output(out, n, "out")?;
        let res = run_hamming_weight(&mut s.channel, &bits).map_err(fail)?;
        for (o, r) in out.iter_mut().zip(res.outputs) {
            *o = r.map_or(-1, |v| v as i64);
        }
        Ok(())
    })
}

/// Least `gamma` with `p^gamma <= target`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nb_required_gamma(p: f64, target: f64, out: *mut u32) -> NbStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = required_gamma(p, target).map_err(fail)?;
        Ok(())
    })
}

/// Least prime `>= m`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nb_smallest_prime_at_least(m: u64, out: *mut u64) -> NbStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = smallest_prime_at_least(m).map_err(fail)?;
        Ok(())
    })
}

/// `θ_ℓ` for `ℓ = a..=b`; `out` receives `b - a + 1` values.
///
/// # Safety
/// `out` must hold `b - a + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn nb_theta_table(a: u64, b: u64, p: f64, out: *mut f64) -> NbStatus {
    guard(|| {
        if b < a {
            return Err(fail(Error::InvalidArgument(format!(
                "empty interval [{a}, {b}]"
            ))));
        }
        let table = ThetaTable::new(Interval { lo: a, hi: b }, p).map_err(fail)?;
        output(out, table.values.len(), "out")?.copy_from_slice(&table.values);
        Ok(())
    })
}

/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nb_code_new(k: usize, out: *mut *mut NbCode) -> NbStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let spec = CodeSpec::concatenated(k).map_err(fail)?;
        *out = Box::into_raw(Box::new(NbCode { spec }));
        Ok(())
    })
}

/// # Safety
/// `code` must come from [`nb_code_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nb_code_free(code: *mut NbCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// Codeword length in bits (0 for a null handle).
///
/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nb_code_len(code: *const NbCode) -> usize {
    code.as_ref().map_or(0, |c| c.spec.codeword_len())
}

/// Encode `k` message bits into `nb_code_len` codeword bits.
///
/// # Safety
/// `message` must hold `k` bytes and `codeword` `nb_code_len(code)` bytes.
#[no_mangle]
pub unsafe extern "C" fn nb_code_encode(
    code: *const NbCode,
    message: *const u8,
    codeword: *mut u8,
) -> NbStatus {
    guard(|| {
        let c = code.as_ref().ok_or_else(|| null("code"))?;
        let msg = bools(input(message, c.spec.k(), "message")?)?;
        let out = output(codeword, c.spec.codeword_len(), "codeword")?;
        let word = c.spec.encode(&BitString::from_bools(&msg)).map_err(fail)?;
        for (o, b) in out.iter_mut().zip(word.iter()) {
            *o = b as u8;
        }
        Ok(())
    })
}

/// Decode a received word (bytes 0, 1, or 2 for an erasure) into `k` message bits.
///
/// # Safety
/// `received` must hold `nb_code_len(code)` bytes and `message` `k` bytes.
#[no_mangle]
pub unsafe extern "C" fn nb_code_decode(
    code: *const NbCode,
    received: *const u8,
    message: *mut u8,
) -> NbStatus {
    guard(|| {
        let c = code.as_ref().ok_or_else(|| null("code"))?;
        let rx = input(received, c.spec.codeword_len(), "received")?;
        let symbols = rx
            .iter()
            .map(|&b| match b {
                0 => Ok(Some(false)),
                1 => Ok(Some(true)),
                2 => Ok(None),
                _ => Err(fail(Error::InvalidArgument(format!(
                    "symbol {b} is not 0, 1 or 2"
                )))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let out = output(message, c.spec.k(), "message")?;
        let msg = c
            .spec
            .decode(&ReceivedWord::from_symbols(&symbols))
            .map_err(fail)?;
        for (o, b) in out.iter_mut().zip(msg.iter()) {
            *o = b as u8;
        }
        Ok(())
    })
}
