"""Smoke test for the ocsched extension (build with `maturin develop`)."""

import json

import ocsched


def main():
    inst = ocsched.Instance(
        num_ports=3,
        rates=[1.0, 2.0],
        delay=1.0,
        coflows=[
            {"flows": [(0, 0, 4.0), (1, 2, 1.0)], "weight": 1.0},
            {"flows": [(0, 1, 2.0), (2, 2, 3.0)], "weight": 2.0},
            {"flows": [(2, 0, 5.0)], "release": 1.0},
        ],
    )
    print(inst)
    again = ocsched.Instance.from_json(inst.to_json())
    assert again.to_json() == inst.to_json()

    lp = ocsched.solve_lp(inst)
    assert lp["objective"] > 0

    for name in ocsched.SCHEMES:
        sched = ocsched.run_scheme(inst, name)
        assert sched["objective"] >= lp["objective"] * (1 - 1e-6), name
        assert ocsched.check_schedule(inst, sched) == [], name

    records = ocsched.compare_schemes(inst)
    assert [r["scheme"] for r in records] == list(ocsched.SCHEMES)
    assert all(r["error"] is None for r in records)

    report = ocsched.guarantees(inst)
    assert report["within_factor"]

    best = ocsched.oracle_best(inst)
    ours = ocsched.run_scheme(inst, "OURS")["objective"]
    assert best["objective"] <= ours + 1e-9

    gen = ocsched.generate(6, 8, [10.0, 20.0], 2.0, seed=3)
    assert gen.num_coflows == 8 and gen.num_cores == 2

    plan = {
        "source": {"kind": "synthetic", "density": 0.3, "volume_min": 1.0, "volume_max": 10.0},
        "network": {"num_ports": 5, "rates": [10.0, 20.0], "delay": 2.0},
        "num_coflows": 6,
        "sweep": [{"axis": "delay", "values": [1.0, 4.0]}],
    }
    rows = ocsched.sweep(json.dumps(plan))
    assert len(rows) == 2 * len(ocsched.SCHEMES)

    try:
        ocsched.run_scheme(inst, "nope")
    except KeyError:
        pass
    else:
        raise AssertionError("unknown scheme accepted")

    print("smoke test ok:", {r["scheme"]: round(r["total_weighted_cct"], 3) for r in records})


if __name__ == "__main__":
    main()
