//! Named experiment presets reproducing the three contraction theorems.

use crate::error::{CoagError, Result};
use crate::kernel::KernelKind;

use super::config::Settings;

pub const PRESETS: [&str; 3] = ["thm1", "thm2", "thm3"];

pub fn profile_name(kernel: KernelKind) -> &'static str {
    match kernel {
        KernelKind::Constant => "G_const",
        KernelKind::Additive => "G_add",
        KernelKind::Multiplicative => "G_mult",
    }
}

/// Settings of a preset: kernel, the pair of initial data, the kappa sample
/// set, convergence to the exact profile and the ODE cross-check.
pub fn settings(name: &str) -> Result<Settings> {
    let text = match name.trim() {
        "thm1" => "kernel = const\ng1 = exp\ng2 = gamma(2,2)\nkappa = 1.25, 1.5, 1.75, 2.0\n",
        "thm2" => "kernel = add\ng1 = G_add\ng2 = gamma(2,2)\nkappa = 2.25, 2.5, 2.75\n",
        "thm3" => "kernel = mult\ng1 = G_mult\ng2 = exp\nkappa = 2.25, 2.5, 2.75\n",
        other => return Err(CoagError::UnknownName(format!("preset '{other}' (expected thm1, thm2 or thm3)"))),
    };
    Settings::parse(&format!("{text}profile_mode = true\node_guard = true\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_cover_each_kernel() {
        for (name, kernel) in PRESETS.iter().zip(KernelKind::ALL) {
            let c = settings(name).unwrap().build().unwrap();
            assert_eq!(c.kernel, kernel);
            assert!(c.profile_mode && c.ode_guard);
            assert!(c.kappas.iter().all(|&k| kernel.kappa_in_theorem_range(k)));
            assert_eq!(c.taus.len(), 21);
        }
        assert!(settings("thm4").is_err());
    }
}
