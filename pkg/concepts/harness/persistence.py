"""policy.bin reader/writer.

Layout (little-endian, version 1):
    8 bytes  magic b"GRIDPOL\\0"
    uint16   format version
    uint32   header length H
    H bytes  UTF-8 JSON header: kind plus whatever the kind needs to rebuild the policy
    payload  qlearning: values (float64, S x A) then visits (int64, S x A)
             dqn / actor_critic: network byte block
             priority_list / random: empty
"""
from typing import Dict, List, Tuple
import json
import logging
import struct

import numpy as np

from concepts.errors import PolicyLoadError
from concepts.grid_env.algorithms import ActionTemplate
from concepts.harness.policies import (DispatchPolicy, NetworkPolicy, PriorityListPolicy, RandomPolicy,
                                       TabularPolicy)
from concepts.nn_approx.algorithms import Network
from concepts.rl_deep.algorithms import FeatureScaler
from concepts.rl_tabular.algorithms import DiscretizationScheme, QTable

logger = logging.getLogger(__name__)

POLICY_MAGIC = b"GRIDPOL\x00"
POLICY_FORMAT_VERSION = 1
_PREFIX = struct.Struct("<HI")


def _templates_to_json(templates) -> List[Dict]:
    return [t.to_dict() for t in templates]


def _templates_from_json(items) -> Tuple[ActionTemplate, ...]:
    return tuple(ActionTemplate(tuple(float(d) for d in item['gen_deltas']), float(item['storage_power']))
                 for item in items)


def _scheme_to_json(scheme: DiscretizationScheme) -> Dict:
    return {
        'demand_edges': list(scheme.demand_edges),
        'soc_edges': list(scheme.soc_edges),
        'renewable_edges': list(scheme.renewable_edges),
        'include_hour': scheme.include_hour,
        'hours': scheme.hours,
    }


def encode_policy(policy: DispatchPolicy) -> bytes:
    header = {'kind': policy.kind}
    payload = b""
    if isinstance(policy, TabularPolicy):
        header['scheme'] = _scheme_to_json(policy.scheme)
        header['templates'] = _templates_to_json(policy.templates)
        header['shape'] = list(policy.q.values.shape)
        payload = (policy.q.values.astype("<f8").tobytes()
                   + policy.q.visits.astype("<i8").tobytes())
    elif isinstance(policy, NetworkPolicy):
        header['scaler'] = policy.scaler.to_dict()
        header['templates'] = _templates_to_json(policy.templates)
        payload = policy.net.to_bytes()
    elif isinstance(policy, RandomPolicy):
        header['templates'] = _templates_to_json(policy.templates)
    elif isinstance(policy, PriorityListPolicy):
        header['n_generators'] = policy.n_generators
    else:
        raise TypeError(f"cannot serialize {type(policy).__name__}")
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    return POLICY_MAGIC + _PREFIX.pack(POLICY_FORMAT_VERSION, len(blob)) + blob + payload


def decode_policy(data: bytes) -> DispatchPolicy:
    if len(data) < len(POLICY_MAGIC) + _PREFIX.size or not data.startswith(POLICY_MAGIC):
        raise PolicyLoadError("not a policy file (bad magic)")
    version, header_len = _PREFIX.unpack_from(data, len(POLICY_MAGIC))
    if version != POLICY_FORMAT_VERSION:
        raise PolicyLoadError(f"policy format version {version}, expected {POLICY_FORMAT_VERSION}")
    start = len(POLICY_MAGIC) + _PREFIX.size
    if len(data) < start + header_len:
        raise PolicyLoadError("truncated policy header")
    payload = data[start + header_len:]
    try:
        header = json.loads(data[start:start + header_len].decode("utf-8"))
        return _build(header, payload)
    except PolicyLoadError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise PolicyLoadError(f"corrupt policy file: {exc}") from exc


def _build(header: Dict, payload: bytes) -> DispatchPolicy:
    kind = header['kind']
    if kind == "qlearning":
        scheme = DiscretizationScheme(action_set=_templates_from_json(header['templates']), **header['scheme'])
        n_states, n_actions = (int(n) for n in header['shape'])
        count = n_states * n_actions
        if len(payload) != 16 * count:
            raise PolicyLoadError(f"Q table payload has {len(payload)} bytes, expected {16 * count}")
        values = np.frombuffer(payload, dtype="<f8", count=count).astype(np.float64)
        visits = np.frombuffer(payload, dtype="<i8", count=count, offset=8 * count).astype(np.int64)
        if not np.all(np.isfinite(values)):
            raise PolicyLoadError("Q values are not finite")
        q = QTable(values.reshape(n_states, n_actions), visits.reshape(n_states, n_actions))
        return TabularPolicy(q, scheme)
    if kind in ("dqn", "actor_critic"):
        scaler_fields = dict(header['scaler'])
        scaler_fields['p_max'] = tuple(scaler_fields['p_max'])
        return NetworkPolicy(Network.from_bytes(payload), FeatureScaler(**scaler_fields),
                             _templates_from_json(header['templates']), kind=kind)
    if payload:
        raise PolicyLoadError(f"unexpected payload for a {kind} policy")
    if kind == "random":
        return RandomPolicy(_templates_from_json(header['templates']))
    if kind == "priority_list":
        return PriorityListPolicy(n_generators=header.get('n_generators'))
    raise PolicyLoadError(f"unknown policy kind {kind!r}")


def save_policy(policy: DispatchPolicy, path: str):
    with open(path, "wb") as fh:
        fh.write(encode_policy(policy))
    logger.info("saved %s policy to %s", policy.kind, path)


def load_policy(path: str) -> DispatchPolicy:
    with open(path, "rb") as fh:
        return decode_policy(fh.read())
