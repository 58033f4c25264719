"""
Truncated single-block CBC-MAC and the forwarding-entry / PVF chains.

Every MAC input fits one AES block: 15 bytes for an FE MAC and 14 bytes for a
PVF step (6 bytes for the ingress PVF). Inputs are zero-padded to 16 bytes.
"""
from __future__ import annotations

import functools
import logging
from dataclasses import dataclass

from Crypto.Cipher import AES
from Crypto.Random import get_random_bytes

from .exceptions import MacInputError, ProvisioningError
from .wire import FE_MAC_LEN, PVF_LEN, ForwardingEntry

logger = logging.getLogger(__name__)

BLOCK_SIZE = 16
KEY_LEN = 16
CHAIN_LEN = 7
TWEAK_LEN = 6
FE_MAC_INPUT_LEN = 15
PVF_MAC_INPUT_LEN = 14
ZERO_IV = b'\x00' * BLOCK_SIZE


# ==========================================
# 1. KEYS
# ==========================================
@dataclass(frozen=True)
class SwitchKeys:
    switch_id: int
    k_fe: bytes
    k_pvf: bytes

    def __post_init__(self):
        if len(self.k_fe) != KEY_LEN or len(self.k_pvf) != KEY_LEN:
            raise ProvisioningError(f"switch {self.switch_id}: keys must be {KEY_LEN} bytes")


class KeyStore:
    """Controller-side key material, one ``SwitchKeys`` per registered switch.

    Keys come from ``Crypto.Random`` unless an ``rng`` (a seeded ``random.Random``)
    is supplied; simulations pass one so that a seed reproduces a run byte for byte.
    """

    def __init__(self, rng=None):
        self._rng = rng
        self._keys = {}

    def _fresh_key(self):
        if self._rng is not None:
            return self._rng.randbytes(KEY_LEN)
        return get_random_bytes(KEY_LEN)

    def provision(self, switch_id):
        if switch_id in self._keys:
            return self._keys[switch_id]
        k_fe = self._fresh_key()
        k_pvf = self._fresh_key()
        while k_pvf == k_fe:
            k_pvf = self._fresh_key()
        keys = SwitchKeys(switch_id, k_fe, k_pvf)
        self._keys[switch_id] = keys
        logger.debug(f"Provisioned keys for switch {switch_id}")
        return keys

    def add(self, keys):
        self._keys[keys.switch_id] = keys

    def get(self, switch_id):
        try:
            return self._keys[switch_id]
        except KeyError:
            raise ProvisioningError(f"no keys provisioned for switch {switch_id}") from None

    def __contains__(self, switch_id):
        return switch_id in self._keys

    def __len__(self):
        return len(self._keys)


@dataclass(frozen=True)
class PvfTweak:
    """C = id || seq_no, where id is a FlowID, FailoverPathID or TreeID."""
    id: int
    seq_no: int

    def encode(self):
        return self.id.to_bytes(3, 'big') + self.seq_no.to_bytes(3, 'big')


# ==========================================
# 2. PRIMITIVE
# ==========================================
@functools.lru_cache(maxsize=4096)
def _block_cipher(key):
    # Single-block CBC-MAC with a zero IV is one raw block encryption; ECB keeps the object reusable.
    return AES.new(key, AES.MODE_ECB)


def mac_trunc(key, msg, out_len):
    if len(msg) > BLOCK_SIZE:
        raise MacInputError(f"MAC input of {len(msg)} bytes exceeds one {BLOCK_SIZE}-byte block")
    if out_len not in (FE_MAC_LEN, PVF_LEN):
        raise MacInputError(f"truncation length must be {FE_MAC_LEN} or {PVF_LEN}, got {out_len}")
    block = bytes(msg) + b'\x00' * (BLOCK_SIZE - len(msg))
    return _block_cipher(bytes(key)).encrypt(block)[:out_len]


# ==========================================
# 3. FORWARDING-ENTRY CHAIN
# ==========================================
def bootstrap_chain(flow_id, exp_time):
    """B = FlowID || ExpTime, the chain value standing in for FE(S0)."""
    return flow_id.to_bytes(3, 'big') + exp_time.to_bytes(4, 'big')


def fe_mac_input(egress_if, prev, b):
    if len(prev) != CHAIN_LEN or len(b) != CHAIN_LEN:
        raise MacInputError(f"chain values must be {CHAIN_LEN} bytes")
    msg = bytes([egress_if]) + prev + b
    assert len(msg) == FE_MAC_INPUT_LEN
    return msg


def fe_mac(keys, egress_if, prev, b):
    return mac_trunc(keys.k_fe, fe_mac_input(egress_if, prev, b), FE_MAC_LEN)


def build_fe_list(hops, keystore, flow_id, exp_time):
    """FEs for ``hops``, an ordered list of (switch_id, egress_if) for S1..Sn."""
    b = bootstrap_chain(flow_id, exp_time)
    chain = b
    fes = []
    for switch_id, egress_if in hops:
        mac = fe_mac(keystore.get(switch_id), egress_if, chain, b)
        fes.append(ForwardingEntry(egress_if=egress_if, mac=mac))
        chain = mac
    return fes


def previous_chain(fes, fe_ptr, flow_id, exp_time):
    """Chain value an FE at ``fe_ptr`` was computed over."""
    if fe_ptr == 0:
        return bootstrap_chain(flow_id, exp_time)
    return fes[fe_ptr - 1].mac


# ==========================================
# 4. PATH VALIDATION FIELD
# ==========================================
def pvf_init(keys, tweak):
    return mac_trunc(keys.k_pvf, tweak.encode(), PVF_LEN)


def pvf_step_input(prev, tweak):
    if len(prev) != PVF_LEN:
        raise MacInputError(f"PVF must be {PVF_LEN} bytes")
    msg = bytes(prev) + tweak.encode()
    assert len(msg) == PVF_MAC_INPUT_LEN
    return msg


def pvf_step(keys, prev, tweak):
    return mac_trunc(keys.k_pvf, pvf_step_input(prev, tweak), PVF_LEN)


def expected_pvf(segments, keystore):
    """Fold the PVF over ``segments``: (switch sequence, tweak) pairs in traversal order.

    The first switch overall computes the initial PVF; every later switch steps it
    with the tweak of the segment it belongs to.
    """
    pvf = None
    for switches, tweak in segments:
        for switch_id in switches:
            keys = keystore.get(switch_id)
            pvf = pvf_init(keys, tweak) if pvf is None else pvf_step(keys, pvf, tweak)
    if pvf is None:
        raise ValueError("expected_pvf needs at least one switch")
    return pvf
