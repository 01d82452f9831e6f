use serde::{Deserialize, Serialize};

use crate::params::{DelayParams, Mask, NetworkParams};
use crate::tensor::Matrix;

/// Learnable parameter groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    WIn,
    WRec,
    WOut,
    DIn,
    DRec,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::WIn, Group::WRec, Group::WOut, Group::DIn, Group::DRec];

    pub fn name(self) -> &'static str {
        match self {
            Group::WIn => "w_in",
            Group::WRec => "w_rec",
            Group::WOut => "w_out",
            Group::DIn => "d_in",
            Group::DRec => "d_rec",
        }
    }

    pub fn is_delay(self) -> bool {
        matches!(self, Group::DIn | Group::DRec)
    }
}

/// Values of a group in flat row-major order; empty if absent.
pub fn group_values(params: &NetworkParams, group: Group) -> &[f64] {
    match group {
        Group::WIn => params.w_in.as_slice(),
        Group::WRec => params.w_rec.as_ref().map_or(&[], |m| m.as_slice()),
        Group::WOut => params.w_out.as_slice(),
        Group::DIn => params.d_in.values(),
        Group::DRec => params.d_rec.values(),
    }
}

pub fn group_values_mut(params: &mut NetworkParams, group: Group) -> &mut [f64] {
    match group {
        Group::WIn => params.w_in.as_mut_slice(),
        Group::WRec => params.w_rec.as_mut().map_or(&mut [], |m| m.as_mut_slice()),
        Group::WOut => params.w_out.as_mut_slice(),
        Group::DIn => params.d_in.values_mut(),
        Group::DRec => params.d_rec.values_mut(),
    }
}

/// Whether flat entry `idx` of `group` is a live (unmasked) parameter.
pub fn is_live(params: &NetworkParams, group: Group, idx: usize) -> bool {
    let masked = |mask: Option<&Mask>, idx: usize| {
        mask.is_none_or(|m| {
            let cols = m.shape().1;
            m.get(idx / cols, idx % cols)
        })
    };
    match group {
        Group::WIn => masked(Some(&params.mask_in), idx),
        Group::WRec => masked(params.mask_rec.as_ref(), idx),
        Group::WOut => true,
        Group::DIn => match params.d_in {
            DelayParams::Synaptic(_) => masked(Some(&params.mask_in), idx),
            _ => true,
        },
        Group::DRec => match params.d_rec {
            DelayParams::Synaptic(_) => masked(params.mask_rec.as_ref(), idx),
            _ => true,
        },
    }
}

/// Gradient accumulators shaped like [`NetworkParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub w_in: Matrix,
    pub w_rec: Option<Matrix>,
    pub w_out: Matrix,
    pub d_in: DelayParams,
    pub d_rec: DelayParams,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            w_in: Matrix::zeros(params.w_in.rows(), params.w_in.cols()),
            w_rec: params.w_rec.as_ref().map(|m| Matrix::zeros(m.rows(), m.cols())),
            w_out: Matrix::zeros(params.w_out.rows(), params.w_out.cols()),
            d_in: params.d_in.zeros_like(),
            d_rec: params.d_rec.zeros_like(),
        }
    }

    pub fn get(&self, group: Group) -> &[f64] {
        match group {
            Group::WIn => self.w_in.as_slice(),
            Group::WRec => self.w_rec.as_ref().map_or(&[], |m| m.as_slice()),
            Group::WOut => self.w_out.as_slice(),
            Group::DIn => self.d_in.values(),
            Group::DRec => self.d_rec.values(),
        }
    }

    pub fn get_mut(&mut self, group: Group) -> &mut [f64] {
        match group {
            Group::WIn => self.w_in.as_mut_slice(),
            Group::WRec => self.w_rec.as_mut().map_or(&mut [], |m| m.as_mut_slice()),
            Group::WOut => self.w_out.as_mut_slice(),
            Group::DIn => self.d_in.values_mut(),
            Group::DRec => self.d_rec.values_mut(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for g in Group::ALL {
            for (a, b) in self.get_mut(g).iter_mut().zip(other.get(g)) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in Group::ALL {
            self.get_mut(g).iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn zero(&mut self) {
        for g in Group::ALL {
            self.get_mut(g).fill(0.0);
        }
    }

    /// First non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<(Group, usize)> {
        Group::ALL.into_iter().find_map(|g| self.get(g).iter().position(|x| !x.is_finite()).map(|i| (g, i)))
    }
}
