use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// Unnormalised d-dimensional FFT in place over a row-major `n^d` array.
pub(crate) fn fft_nd(data: &mut [Complex64], dim: usize, n: usize, inverse: bool) {
    let plans = plans(n);
    let fft = if inverse {
        &plans.inverse
    } else {
        &plans.forward
    };
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let total = data.len();
    debug_assert_eq!(total, n.pow(dim as u32));

    // last axis is contiguous
    fft.process_with_scratch(data, &mut scratch);

    let mut line = vec![Complex64::default(); n];
    for axis in 0..dim.saturating_sub(1) {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = n * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let start = outer + inner;
                for (m, slot) in line.iter_mut().enumerate() {
                    *slot = data[start + m * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (m, value) in line.iter().enumerate() {
                    data[start + m * stride] = *value;
                }
            }
        }
    }
}
