mod common;

use common::ablation_checks;
use fairsin_core::EncoderKind;

#[test]
fn disabled_components_reproduce_vanilla() {
    for kind in EncoderKind::ALL {
        let rep = ablation_checks(kind, 3);
        assert!(rep.all(), "{kind}: {rep:?}");
    }
}
