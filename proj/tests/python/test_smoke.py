import json

import pytest

import sense

NERSC = "urn:ogf:network:nersc.gov:2013:server+dtm11.nersc.gov"
CALTECH = "urn:ogf:network:caltech.edu:2013:server+xfer-2.ultralight.org"
REFERENCE_NOW = 1535810400


def p2p(a, b, mbps=1000):
    return {
        "service_type": "Multi-Path P2P VLAN",
        "service_alias": "smoke",
        "connections": [
            {
                "name": "connection 1",
                "terminals": [{"uri": a, "label": "any"}, {"uri": b, "label": "any"}],
                "bandwidth": {"qos_class": "guaranteedCapped", "capacity": mbps, "unit": "mbps"},
            }
        ],
    }


def test_tbp_duration():
    assert sense.tbp_duration(1_000_000, 5000) == 1600


def test_gen_topology_is_deterministic():
    a = sense.gen_topology("scaleout67", seed=3)
    assert a == sense.gen_topology("scaleout67", seed=3)
    assert len(a["rms"]) == 67
    assert a["node_count"] >= 92 and a["link_count"] >= 200


def test_calendar_holds_and_errors():
    port = "urn:ogf:network:a.net:2013:sw+p"
    cal = sense.Calendar(port, 100000, 1000, 1009)
    seg = {
        "connection_id": "c1",
        "port_urn": port,
        "vlan": 1000,
        "bandwidth": 90000,
        "qos_class": "guaranteedCapped",
        "interval": [0, 100],
    }
    cal.try_hold(json.dumps(seg), 0, 60, "d1")
    assert cal.available_bandwidth(10, 20) == 10000
    cal.commit_hold("d1", 5)
    with pytest.raises(sense.SenseError) as err:
        cal.try_hold(json.dumps(dict(seg, connection_id="c2", vlan=1001, bandwidth=20000)), 5, 60, "d2")
    assert err.value.code == "insufficient-bandwidth"
    assert sense.error_detail(err.value)["max"] == 10000


def test_design_from_pulled_models():
    with sense.Fabric() as f:
        r = f.create(p2p(NERSC, CALTECH, 5000))
        assert r["state"] == "computed"
        assert len(r["design"]["domains"]) == 5


def test_lifecycle_and_audit():
    with sense.Fabric() as f:
        r = f.create(p2p(NERSC, CALTECH))
        f.reserve(r["instance_id"])
        assert f.commit(r["instance_id"])["state"] == "committed"
        status = f.status(r["instance_id"])
        assert set(status["rm_states"].values()) == {"committed"}
        assert f.audit()["ok"]
        assert f.cancel(r["instance_id"])["state"] == "cancelled"


def test_unknown_instance_raises():
    with sense.Fabric() as f:
        with pytest.raises(sense.SenseError) as err:
            f.status("nope")
        assert err.value.internal_code == "unknown-instance"


def test_conformance_corpus():
    corpus = sense.conformance_corpus()
    tbp = json.loads(corpus["tbp/response.json"])
    assert tbp["queries"][0]["options"]["bandwidth"] == 5000
    assert json.loads(corpus["intent/response.json"])["state"] == "computed"
