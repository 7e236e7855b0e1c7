//! Spherical Bessel values of real order against high-precision references
//! produced by scripts/bessel_oracle.py.

use sqfree::special::spherical_bessel_j_log;

// (nu, u, sign, log10 |j_nu(u)|)
const REF: &[(f64, f64, f64, f64)] = &[
    (0.3, 1.0, 1.0, -0.17378482857792009514),
    (0.3, 5.0, -1.0, -0.70195305828409350006),
    (0.3, 40.0, 1.0, -1.617314891575938559),
    (0.3, 400.0, -1.0, -2.8859631974535998134),
    (0.3, 4000.0, -1.0, -4.1585401187121356558),
    (0.3, 100000.0, 1.0, -5.3137651292932043738),
    (2.5, 1.0, 1.0, -1.610496748288173455),
    (2.5, 5.0, 1.0, -0.68933305553537787908),
    (2.5, 40.0, -1.0, -1.6021006512329464729),
    (2.5, 400.0, 1.0, -3.2202534871450139756),
    (2.5, 4000.0, -1.0, -5.1003559007012522348),
    (2.5, 100000.0, -1.0, -5.1355463478064072608),
    (7.0, 1.0, 1.0, -6.31965231937131785),
    (7.0, 5.0, 1.0, -1.7470795693693299507),
    (7.0, 40.0, -1.0, -1.6023969647864408675),
    (7.0, 400.0, -1.0, -2.9350432308379020081),
    (7.0, 4000.0, -1.0, -3.7416350017761866175),
    (7.0, 100000.0, -1.0, -5.0002733530754755611),
    (50.0, 1.0, 1.0, -80.44185869594710375),
    (50.0, 5.0, 1.0, -45.544016899348183704),
    (50.0, 40.0, 1.0, -4.027107033682006722),
    (50.0, 400.0, -1.0, -2.6577210702345072082),
    (50.0, 4000.0, 1.0, -3.6586338028992906259),
    (50.0, 100000.0, -1.0, -6.6381893079791418814),
    (333.3, 1.0, 1.0, -799.41925810746257742),
    (333.3, 5.0, 1.0, -566.46033894250753038),
    (333.3, 40.0, 1.0, -265.97213649192139154),
    (333.3, 400.0, 1.0, -2.4944181537947900261),
    (333.3, 4000.0, -1.0, -4.6985716436941665907),
    (333.3, 100000.0, 1.0, -5.000544411951264939),
    (5000.0, 1.0, 1.0, -17832.678166997940781),
    (5000.0, 5.0, 1.0, -14337.828666314993593),
    (5000.0, 40.0, 1.0, -9822.4129220661766359),
    (5000.0, 400.0, 1.0, -4825.8542848754393786),
    (5000.0, 4000.0, 1.0, -206.25781218902747569),
    (5000.0, 100000.0, 1.0, -5.2187597921083777438),
];

#[test]
fn matches_reference_table() {
    for &(nu, u, sign, log10) in REF {
        let (s, ln) = spherical_bessel_j_log(nu, u).unwrap();
        let got = ln / std::f64::consts::LN_10;
        // relative error of the value, measured on the log scale
        let rel = (got - log10).abs() * std::f64::consts::LN_10;
        assert_eq!(s, sign, "sign at nu={nu}, u={u}");
        assert!(rel < 1e-10, "nu={nu} u={u}: log10 {got} vs {log10} (rel {rel:e})");
    }
}
