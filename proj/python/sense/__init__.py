"""Python access to the orchestration core. Documents are plain dicts."""

import json

from . import _sense
from ._sense import Calendar, SenseError, tbp_duration

__all__ = [
    "Calendar",
    "Fabric",
    "SenseError",
    "answer_queries",
    "compute_design",
    "conformance_corpus",
    "error_detail",
    "gen_topology",
    "tbp_duration",
    "union_graph",
]


def _dumps(doc):
    return doc if isinstance(doc, str) else json.dumps(doc)


def error_detail(err):
    return json.loads(err.detail)


def gen_topology(preset="baseline8", seed=1, latency_scale=0.1):
    return json.loads(_sense.gen_topology(preset, seed, latency_scale))


def union_graph(models):
    return json.loads(_sense.union_graph(_dumps(models)))


def compute_design(intent, models, now):
    return json.loads(_sense.compute_design(_dumps(intent), _dumps(models), now))


def answer_queries(intent, models, now, utc_offset_minutes=0):
    return json.loads(_sense.answer_queries(_dumps(intent), _dumps(models), now, utc_offset_minutes))


def conformance_corpus():
    return dict(_sense.conformance_corpus())


class Fabric:
    """RM fleet plus orchestrator. In-process unless http=True."""

    def __init__(self, preset="baseline8", seed=1, latency_scale=0.0, http=False):
        self._f = _sense.Fabric(preset, seed, latency_scale, http)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def manifest(self):
        return json.loads(self._f.manifest())

    def create(self, intent):
        return json.loads(self._f.create(_dumps(intent)))

    def negotiate(self, instance_id, intent):
        return json.loads(self._f.negotiate(instance_id, _dumps(intent)))

    def reserve(self, instance_id):
        return json.loads(self._f.reserve(instance_id))

    def commit(self, instance_id, wait=True):
        return json.loads(self._f.commit(instance_id, not wait))

    def cancel(self, instance_id):
        return json.loads(self._f.cancel(instance_id))

    def status(self, instance_id):
        return json.loads(self._f.status(instance_id))

    def run_table1(self):
        return json.loads(self._f.run_table1())

    def audit(self):
        return json.loads(self._f.audit())

    def close(self):
        self._f.close()
