use pyo3::prelude::*;
use pyo3::types::{PyDict, PyModule};

fn with_module<F: FnOnce(Python<'_>, &Bound<'_, PyModule>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = PyModule::new(py, "nomamimo_py").unwrap();
        nomamimo_py::nomamimo_py(&m).unwrap();
        f(py, &m);
    });
}

#[test]
fn module_exposes_core_operations() {
    with_module(|py, m| {
        let globals = PyDict::new(py);
        globals.set_item("nm", m).unwrap();
        py.run(
            c"
b1, b2 = 10 ** 1.5, 10 ** -0.5
v, c = nm.m_star(b1, b2, 1.0)
assert abs(v - 10.16) < 0.01 and c == 11
scn = nm.Scenario(25, [b1, b2], trials=200)
p, rep = nm.solve_p1(scn, 'noma')
assert p == [1.0, 0.0] and rep.scheme == 'noma'
assert abs(sum(nm.waterfill([3.0, 1.0], 2.0)) - 2.0) < 1e-12
assert nm.ergodic_rates_mc(scn, 'mmimo', [0.5, 0.5]).trials_used == 200
assert 'schema_version=1' in nm.run_experiment('sumrate-vs-m-2user')
",
            Some(&globals),
            None,
        )
        .unwrap();
    });
}

#[test]
fn invalid_input_raises_value_error() {
    with_module(|py, m| {
        let e = m.getattr("Scenario").unwrap().call1((4usize, vec![1.0, 2.0, 3.0])).unwrap_err();
        assert!(e.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        assert!(e.to_string().contains("K must be even"));
        let scn = m.getattr("Scenario").unwrap().call1((4usize, vec![2.0, 1.0])).unwrap();
        assert!(m.getattr("solve_p1").unwrap().call1((scn, "ofdma")).is_err());
    });
}
