use pyo3::prelude::*;
use pyo3::types::PyDict;

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyDict>)>(f: F) {
    use sbwave_py::sbwave_py;
    pyo3::append_to_inittab!(sbwave_py);
    Python::initialize();
    Python::attach(|py| {
        let globals = PyDict::new(py);
        globals.set_item("sb", py.import("sbwave_py").unwrap()).unwrap();
        f(py, &globals);
    });
}

fn eval(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) -> f64 {
    let code = std::ffi::CString::new(code).unwrap();
    py.eval(&code, Some(globals), None).unwrap().extract().unwrap()
}

#[test]
fn module_round_trip() {
    with_module(|py, g| {
        let k = eval(py, g, "sb.CnoidalWave(1.0, 13.0, 128).k");
        let p = eval(py, g, "sb.wave_params(1.0, 13.0)['k']");
        assert!(k > 0.0 && k < 1.0);
        assert_eq!(k, p);
        let res = eval(py, g, "sb.CnoidalWave(1.0, 13.0, 256).residual_sup()");
        assert!(res < 1e-8);
        let e = eval(py, g, "sb.complete_elliptic(0.5)[1]");
        assert!((e - 1.467_462_209_339_427).abs() < 1e-12);
        let bad = py.eval(c"sb.CnoidalWave(1.0, 3.0, 64)", Some(g), None);
        assert!(bad.is_err());
    });
}
