use crate::linalg::{symmetrize, Mat};
use crate::model::StageParams;

/// Operators of the bounded-real recursion at one step, evaluated at the
/// continuation values `(P(k+1), Q(k+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbrlOperators {
    /// `A^T P A + C^T P C - Phi^T Phi`
    pub l: Mat,
    /// `A^T P B + C^T P D`
    pub g: Mat,
    /// `gamma^2 I + B^T P B + D^T P D`
    pub h: Mat,
    /// `Abar^T Q Abar + Cbar^T P Cbar - Phi^T Phi`
    pub lt: Mat,
    /// `Abar^T Q Bbar + Cbar^T P Dbar`
    pub gt: Mat,
    /// `gamma^2 I + Bbar^T Q Bbar + Dbar^T P Dbar`
    pub ht: Mat,
}

pub fn sbrl_operators(
    stage: &StageParams,
    p_next: &Mat,
    q_next: &Mat,
    gamma: f64,
) -> SbrlOperators {
    let (a, b, c, d) = (&stage.a, &stage.b, &stage.c, &stage.d);
    let (ab, bb, cb, db) = (stage.a_bar(), stage.b_bar(), stage.c_bar(), stage.d_bar());
    let l_dim = b.ncols();
    let g2 = Mat::identity(l_dim, l_dim) * (gamma * gamma);
    let phi_w = stage.output_weight();

    let pa = p_next * a;
    let pb = p_next * b;
    let pc = p_next * c;
    let pd = p_next * d;
    let l = symmetrize(&(a.transpose() * &pa + c.transpose() * &pc - &phi_w));
    let g = a.transpose() * &pb + c.transpose() * &pd;
    let h = symmetrize(&(&g2 + b.transpose() * &pb + d.transpose() * &pd));

    let qab = q_next * &ab;
    let qbb = q_next * &bb;
    let pcb = p_next * &cb;
    let pdb = p_next * &db;
    let lt = symmetrize(&(ab.transpose() * &qab + cb.transpose() * &pcb - &phi_w));
    let gt = ab.transpose() * &qbb + cb.transpose() * &pdb;
    let ht = symmetrize(&(&g2 + bb.transpose() * &qbb + db.transpose() * &pdb));

    SbrlOperators {
        l,
        g,
        h,
        lt,
        gt,
        ht,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dimensions;

    #[test]
    fn zero_continuation_leaves_penalty_terms() {
        let dims = Dimensions {
            n: 2,
            l: 3,
            q: 1,
            m_phi: 2,
            horizon: 0,
        };
        let mut s = StageParams::zeros(&dims);
        s.a = Mat::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.5]);
        s.b = Mat::from_element(2, 3, 0.7);
        s.phi = Mat::from_row_slice(2, 2, &[1.0, 2.0, 0.5, -1.0]);
        let z = Mat::zeros(2, 2);
        let ops = sbrl_operators(&s, &z, &z, 0.8);
        let h = Mat::identity(3, 3) * 0.64;
        assert!((&ops.h - &h).amax() < 1e-15);
        assert!((&ops.ht - &h).amax() < 1e-15);
        assert_eq!(ops.g, Mat::zeros(2, 3));
        assert_eq!(ops.gt, Mat::zeros(2, 3));
        let neg = -(s.phi.transpose() * &s.phi);
        assert_eq!(ops.l, neg);
        assert_eq!(ops.lt, neg);
    }
}
