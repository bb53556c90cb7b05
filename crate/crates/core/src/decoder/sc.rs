use super::{combine_partial_sums, f_min_sum, g_combine, hard_decision, leaf_penalty, DecodeOutcome};
use crate::channel::ReceivedFrame;
use crate::polar::{log2_block_length, CodeConstruction};
use crate::{Error, Result};

/// Depth-first SC traversal. `leaf(k, α)` returns the bit fed back as `β` at leaf `k`.
///
/// Returns the root partial sum, i.e. the re-encoded decisions.
pub fn sc_traverse<F>(llr: &[f64], leaf: &mut F) -> Result<Vec<u8>>
where
    F: FnMut(usize, f64) -> u8,
{
    log2_block_length(llr.len())?;
    Ok(visit(llr, 0, leaf))
}

fn visit<F>(alpha: &[f64], first_leaf: usize, leaf: &mut F) -> Vec<u8>
where
    F: FnMut(usize, f64) -> u8,
{
    if alpha.len() == 1 {
        return vec![leaf(first_leaf, alpha[0])];
    }
    let half = alpha.len() / 2;
    let (a, b) = alpha.split_at(half);

    let alpha_left: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| f_min_sum(x, y)).collect();
    let beta_left = visit(&alpha_left, first_leaf, leaf);

    let alpha_right: Vec<f64> = a
        .iter()
        .zip(b)
        .zip(&beta_left)
        .map(|((&x, &y), &bl)| g_combine(x, y, bl))
        .collect();
    let beta_right = visit(&alpha_right, first_leaf + half, leaf);

    combine_partial_sums(&beta_left, &beta_right).expect("sibling subtrees have equal size")
}

/// Plain SC decoding: frozen leaves decide 0, others take the sign of `α`.
pub fn sc_decode(frame: &ReceivedFrame, c: &CodeConstruction) -> Result<DecodeOutcome> {
    if frame.len() != c.len() {
        return Err(Error::InvalidArgument(format!(
            "frame of length {} for N = {}",
            frame.len(),
            c.len()
        )));
    }
    let mut u_hat = vec![0u8; c.len()];
    let mut pm = 0.0;
    sc_traverse(&frame.llr, &mut |k, alpha| {
        let bit = if c.is_frozen(k) { 0 } else { hard_decision(alpha) };
        pm += leaf_penalty(alpha, bit);
        u_hat[k] = bit;
        bit
    })?;
    Ok(DecodeOutcome {
        decoded: c.extract(&u_hat),
        u_hat,
        frame_error: false,
        genie_survived: false,
        pm_of_selected: pm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_zero_frame_decodes_to_zero() {
        let frame = ReceivedFrame { llr: vec![3.0; 16] };
        let c = CodeConstruction::from_info_positions(16, &[3, 5, 6, 7, 9, 11, 12, 15]).unwrap();
        let out = sc_decode(&frame, &c).unwrap();
        assert_eq!(out.decoded, vec![0; 8]);
        assert_eq!(out.pm_of_selected, 0.0);
    }

    #[test]
    fn traversal_order_is_natural() {
        let mut order = Vec::new();
        let root = sc_traverse(&[1.0; 8], &mut |k, _| {
            order.push(k);
            0
        })
        .unwrap();
        assert_eq!(order, (0..8).collect::<Vec<_>>());
        assert_eq!(root, vec![0; 8]);
    }

    #[test]
    fn flipped_frozen_input_still_recovers_info_bit() {
        // P(4,1), info on bit 3, codeword x = u3·(1,1,1,1). Send u3 = 1 so
        // the noiseless LLRs are all −4; then corrupt x0 strongly to +8.
        //   layer-1 left α = (f(8,−4), f(−4,−4)) = (−4, 4)
        //   bit 0: f(−4, 4) = −4      (frozen → 0)
        //   bit 1: g(−4, 4, 0) = 0    (frozen → 0)
        //   layer-1 right α = (g(8,−4,0), g(−4,−4,0)) = (4, −8)
        //   bit 2: f(4, −8) = −4      (frozen → 0)
        //   bit 3: g(4, −8, 0) = −4 → 1
        let c = CodeConstruction::from_info_positions(4, &[3]).unwrap();
        let frame = ReceivedFrame { llr: vec![8.0, -4.0, -4.0, -4.0] };
        let out = sc_decode(&frame, &c).unwrap();
        assert_eq!(out.decoded, vec![1]);
        assert_eq!(out.u_hat, vec![0, 0, 0, 1]);
    }

    #[test]
    fn length_mismatch() {
        let c = CodeConstruction::new(vec![false; 4]).unwrap();
        assert!(sc_decode(&ReceivedFrame { llr: vec![1.0; 8] }, &c).is_err());
    }
}
