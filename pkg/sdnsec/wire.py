"""
Bit-exact codec for the SDNsec unicast and multicast headers.

The normative layout is documented in docs/WIRE_FORMAT.md. All integers are
big-endian; reserved bits encode as zero and are ignored on decode.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .exceptions import EncodingError, ParseError

FIXED_LEN = 6
BLOCK_LEN = 8
FE_LEN = 8
FE_MAC_LEN = 7
PVF_LEN = 8
MULTICAST_LEN = 22
MIN_HEADER_LEN = 22

MAX_LFC = 63
MAX_FE_PTR = 255
MAX_FES = 255
MAX_ID = 0xFFFFFF
MAX_EGRESS_ID = 0xFFFF
MAX_EXP_TIME = 0xFFFFFFFF

PKT_TYPE_BIT = 0x80
DO_NOT_DETOUR_BIT = 0x40
LFC_MASK = 0x3F

_FIXED = struct.Struct('>BBI')
_MULTICAST = struct.Struct('>BBI3s3s2s8s')


def _u24(value):
    return value.to_bytes(3, 'big')


def _from_u24(raw):
    return int.from_bytes(raw, 'big')


def _check_range(name, value, upper):
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= upper:
        raise EncodingError(f"{name}={value!r} outside 0..{upper}")


# ==========================================
# 1. HEADER TYPES
# ==========================================
@dataclass(frozen=True)
class HeaderFixed:
    pkt_type: bool = False
    do_not_detour: bool = False
    lfc: int = 0
    fe_ptr: int = 0
    exp_time: int = 0


@dataclass(frozen=True)
class FlowInfoBlock:
    flow_id: int
    seq_no: int
    egress_id: int


@dataclass(frozen=True)
class ForwardingEntry:
    egress_if: int
    mac: bytes

    def to_bytes(self):
        return bytes([self.egress_if]) + self.mac


@dataclass(frozen=True)
class SdnsecHeader:
    fixed: HeaderFixed
    flow_blocks: tuple[FlowInfoBlock, ...]
    pvf: bytes
    fes: tuple[ForwardingEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, 'flow_blocks', tuple(self.flow_blocks))
        object.__setattr__(self, 'fes', tuple(self.fes))

    @property
    def current_flow(self):
        """The most recent flow block: the original one, or the last failover appended."""
        return self.flow_blocks[-1]

    @property
    def egress_id(self):
        return self.flow_blocks[0].egress_id

    @property
    def current_fe(self):
        return self.fes[self.fixed.fe_ptr]

    def encoded_length(self):
        return FIXED_LEN + (self.fixed.lfc + 2) * BLOCK_LEN + len(self.fes) * FE_LEN


@dataclass(frozen=True)
class MulticastHeader:
    exp_time: int
    tree_id: int
    seq_no: int
    pvf: bytes
    pkt_type: bool = True

    def encoded_length(self):
        return MULTICAST_LEN


# ==========================================
# 2. ENCODING
# ==========================================
def _validate_unicast(header):
    fixed = header.fixed
    if fixed.pkt_type:
        raise EncodingError("unicast header with the multicast PktType bit set")
    _check_range('lfc', fixed.lfc, MAX_LFC)
    _check_range('fe_ptr', fixed.fe_ptr, MAX_FE_PTR)
    _check_range('exp_time', fixed.exp_time, MAX_EXP_TIME)
    if len(header.flow_blocks) != fixed.lfc + 1:
        raise EncodingError(f"{len(header.flow_blocks)} flow blocks for lfc={fixed.lfc}")
    for block in header.flow_blocks:
        _check_range('flow_id', block.flow_id, MAX_ID)
        _check_range('seq_no', block.seq_no, MAX_ID)
        _check_range('egress_id', block.egress_id, MAX_EGRESS_ID)
    if len(header.pvf) != PVF_LEN:
        raise EncodingError(f"PVF must be {PVF_LEN} bytes, got {len(header.pvf)}")
    if len(header.fes) > MAX_FES:
        raise EncodingError(f"{len(header.fes)} forwarding entries exceed {MAX_FES}")
    if fixed.fe_ptr > len(header.fes):
        raise EncodingError(f"fe_ptr={fixed.fe_ptr} beyond {len(header.fes)} entries")
    for fe in header.fes:
        _check_range('egress_if', fe.egress_if, 0xFF)
        if len(fe.mac) != FE_MAC_LEN:
            raise EncodingError(f"FE MAC must be {FE_MAC_LEN} bytes, got {len(fe.mac)}")


def _encode_unicast(header):
    _validate_unicast(header)
    fixed = header.fixed
    flags = (DO_NOT_DETOUR_BIT if fixed.do_not_detour else 0) | fixed.lfc
    parts = [_FIXED.pack(flags, fixed.fe_ptr, fixed.exp_time)]
    for block in header.flow_blocks:
        parts.append(_u24(block.flow_id) + _u24(block.seq_no) + block.egress_id.to_bytes(2, 'big'))
    parts.append(header.pvf)
    parts.extend(fe.to_bytes() for fe in header.fes)
    return b''.join(parts)


def _encode_multicast(header):
    _check_range('exp_time', header.exp_time, MAX_EXP_TIME)
    _check_range('tree_id', header.tree_id, MAX_ID)
    _check_range('seq_no', header.seq_no, MAX_ID)
    if len(header.pvf) != PVF_LEN:
        raise EncodingError(f"PVF must be {PVF_LEN} bytes, got {len(header.pvf)}")
    return _MULTICAST.pack(PKT_TYPE_BIT, 0, header.exp_time, _u24(header.tree_id),
                           _u24(header.seq_no), b'\x00\x00', header.pvf)


def encode(header):
    """Serialize a unicast or multicast header to its wire bytes."""
    if isinstance(header, MulticastHeader):
        return _encode_multicast(header)
    if isinstance(header, SdnsecHeader):
        return _encode_unicast(header)
    raise EncodingError(f"cannot encode {type(header).__name__}")


# ==========================================
# 3. DECODING
# ==========================================
def _decode_multicast(data):
    if len(data) != MULTICAST_LEN:
        raise ParseError(f"multicast header must be {MULTICAST_LEN} bytes, got {len(data)}")
    _flags, _reserved, exp_time, tree_id, seq_no, _pad, pvf = _MULTICAST.unpack(data)
    return MulticastHeader(exp_time=exp_time, tree_id=_from_u24(tree_id),
                           seq_no=_from_u24(seq_no), pvf=pvf)


def _decode_unicast(data):
    if (len(data) - FIXED_LEN) % 8:
        raise ParseError(f"length {len(data)} is not 6 plus a multiple of 8")
    flags, fe_ptr, exp_time = _FIXED.unpack_from(data, 0)
    lfc = flags & LFC_MASK
    pvf_offset = current_flow_block_offset(lfc) + BLOCK_LEN
    fe_base = fe_slot_offset(lfc, 0)
    if len(data) < fe_base:
        raise ParseError(f"truncated header: lfc={lfc} needs {fe_base} bytes, got {len(data)}")
    n_fes = (len(data) - fe_base) // FE_LEN
    if n_fes > MAX_FES:
        raise ParseError(f"{n_fes} forwarding entries exceed {MAX_FES}")
    if fe_ptr > n_fes:
        raise ParseError(f"fe_ptr={fe_ptr} beyond {n_fes} forwarding entries")

    blocks = []
    for i in range(lfc + 1):
        off = FIXED_LEN + i * BLOCK_LEN
        blocks.append(FlowInfoBlock(
            flow_id=_from_u24(data[off:off + 3]),
            seq_no=_from_u24(data[off + 3:off + 6]),
            egress_id=int.from_bytes(data[off + 6:off + 8], 'big'),
        ))
    fes = []
    for i in range(n_fes):
        off = fe_slot_offset(lfc, i)
        fes.append(ForwardingEntry(egress_if=data[off], mac=bytes(data[off + 1:off + FE_LEN])))

    fixed = HeaderFixed(pkt_type=False, do_not_detour=bool(flags & DO_NOT_DETOUR_BIT),
                        lfc=lfc, fe_ptr=fe_ptr, exp_time=exp_time)
    return SdnsecHeader(fixed=fixed, flow_blocks=tuple(blocks),
                        pvf=bytes(data[pvf_offset:pvf_offset + PVF_LEN]), fes=tuple(fes))


def decode(data):
    """Parse wire bytes into a header. Malformed input raises ``ParseError``."""
    data = bytes(data)
    if len(data) < MIN_HEADER_LEN:
        raise ParseError(f"header too short: {len(data)} < {MIN_HEADER_LEN} bytes")
    if data[0] & PKT_TYPE_BIT:
        return _decode_multicast(data)
    return _decode_unicast(data)


# ==========================================
# 4. OFFSETS AND OVERHEAD
# ==========================================
def fe_slot_offset(lfc, fe_ptr):
    if not 0 <= lfc <= MAX_LFC:
        raise ValueError(f"lfc={lfc} outside 0..{MAX_LFC}")
    return FIXED_LEN + (lfc + 2) * BLOCK_LEN + fe_ptr * FE_LEN


def current_flow_block_offset(lfc):
    if not 0 <= lfc <= MAX_LFC:
        raise ValueError(f"lfc={lfc} outside 0..{MAX_LFC}")
    return FIXED_LEN + lfc * BLOCK_LEN


def overhead_bytes(path_switches):
    """Header bytes added to a packet whose path has ``path_switches`` switches, ingress and egress included."""
    if path_switches < 1:
        raise ValueError("a path has at least one switch")
    return MIN_HEADER_LEN + FE_LEN * (path_switches - 1)
