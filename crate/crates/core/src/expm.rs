//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants (Higham 2005), for real or complex square matrices.

use nalgebra::{ComplexField, DMatrix};

/// Order-dependent 1-norm thresholds from Higham's analysis.
const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

pub(crate) fn expm<T>(a: &DMatrix<T>) -> DMatrix<T>
where
    T: ComplexField<RealField = f64>,
{
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return a.clone();
    }

    let norm = one_norm(a);
    let (u, v, squarings) = if norm < THETA_3 {
        let (u, v) = pade(a, &PADE_3);
        (u, v, 0)
    } else if norm < THETA_5 {
        let (u, v) = pade(a, &PADE_5);
        (u, v, 0)
    } else if norm < THETA_7 {
        let (u, v) = pade(a, &PADE_7);
        (u, v, 0)
    } else if norm < THETA_9 {
        let (u, v) = pade(a, &PADE_9);
        (u, v, 0)
    } else {
        let squarings = ((norm / THETA_13).log2().ceil() as i32).max(0);
        let scale = T::from_real(2.0_f64.powi(-squarings));
        let scaled = a.map(|x| x * scale.clone());
        let (u, v) = pade13(&scaled);
        (u, v, squarings)
    };

    // The approximant is (V - U)^{-1} (V + U).
    let numer = &v + &u;
    let denom = v - u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is singular; input norm out of range");

    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

fn one_norm<T>(a: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    a.column_iter()
        .map(|col| col.iter().map(|x| x.clone().modulus()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// U (odd part, pre-multiplied by A) and V (even part) for orders 3..9,
/// where p(A) = U + V and q(A) = V - U.
fn pade<T, const M: usize>(a: &DMatrix<T>, b: &[f64; M]) -> (DMatrix<T>, DMatrix<T>)
where
    T: ComplexField<RealField = f64>,
{
    let n = a.nrows();
    let eye = DMatrix::<T>::identity(n, n);
    let a2 = a * a;

    // Powers a^0, a^2, a^4, ... reused across both parts.
    let mut even_pows = vec![eye];
    while even_pows.len() < M / 2 {
        even_pows.push(even_pows.last().unwrap() * &a2);
    }

    let mut odd_sum = DMatrix::<T>::zeros(n, n);
    let mut even_sum = DMatrix::<T>::zeros(n, n);
    for (k, pow) in even_pows.iter().enumerate() {
        odd_sum += pow * T::from_real(b[2 * k + 1]);
        even_sum += pow * T::from_real(b[2 * k]);
    }
    (a * odd_sum, even_sum)
}

fn pade13<T>(a: &DMatrix<T>) -> (DMatrix<T>, DMatrix<T>)
where
    T: ComplexField<RealField = f64>,
{
    let b = &PADE_13;
    let n = a.nrows();
    let eye = DMatrix::<T>::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_hi = &a6 * (&a6 * T::from_real(b[13]) + &a4 * T::from_real(b[11]) + &a2 * T::from_real(b[9]));
    let u_lo = &a6 * T::from_real(b[7]) + &a4 * T::from_real(b[5]) + &a2 * T::from_real(b[3]) + &eye * T::from_real(b[1]);
    let u = a * (u_hi + u_lo);

    let v_hi = &a6 * (&a6 * T::from_real(b[12]) + &a4 * T::from_real(b[10]) + &a2 * T::from_real(b[8]));
    let v = v_hi + &a6 * T::from_real(b[6]) + &a4 * T::from_real(b[4]) + &a2 * T::from_real(b[2]) + eye * T::from_real(b[0]);
    (u, v)
}
