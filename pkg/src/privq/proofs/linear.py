"""Linear-relation discrete-log proofs (generalized Schnorr).

Proves knowledge of scalars y_1..y_n satisfying a system of equations
P_j = sum_i y_i * G_{j,i} over public points, without revealing the y_i.
Key-switch shares, obfuscation shares, and key-possession statements are
all instances. Non-interactive via the transcript in `transcript.py`.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import MalformedProof
from ..serial import Reader, pack_u8, pack_u32
from .transcript import Transcript

_TAG = 0x01


@dataclass(frozen=True)
class LinearStatement:
    """Equations P_j = sum_i y_i * G_{j,i}; a None base means y_i is absent
    from equation j."""

    bases: tuple  # tuple of rows, each row a tuple of Point | None
    targets: tuple  # tuple of Point, one per row

    def __post_init__(self):
        if len(self.bases) != len(self.targets):
            raise ValueError("one target per equation required")
        widths = {len(row) for row in self.bases}
        if len(widths) != 1:
            raise ValueError("all equation rows must cover the same secrets")

    @property
    def n_secrets(self) -> int:
        return len(self.bases[0])


@dataclass(frozen=True)
class LinearRelationProof:
    statement: LinearStatement
    commitments: tuple  # W_j per equation
    challenge: int
    responses: tuple  # z_i per secret

    def encode(self) -> bytes:
        group = _resolve_group(self.statement.targets[0])
        out = [pack_u8(_TAG), pack_u32(len(self.statement.targets)),
               pack_u32(self.statement.n_secrets)]
        for row in self.statement.bases:
            for base in row:
                if base is None:
                    out.append(pack_u8(0))
                else:
                    out.append(pack_u8(1))
                    out.append(base.encode())
        for target in self.statement.targets:
            out.append(target.encode())
        for w in self.commitments:
            out.append(w.encode())
        out.append(group.encode_scalar(self.challenge))
        for z in self.responses:
            out.append(group.encode_scalar(z))
        return b"".join(out)


# ed25519 points carry no group backref; resolve lazily to avoid an import cycle
_ED = None


def _resolve_group(point):
    global _ED
    if hasattr(point, "group"):
        return point.group
    if _ED is None:
        from ..group.ed25519 import GROUP as _ed

        _ED = _ed
    return _ED


def _absorb_statement(tr: Transcript, statement: LinearStatement):
    tr.absorb(len(statement.targets), statement.n_secrets)
    for row in statement.bases:
        for base in row:
            tr.absorb(base)
    for target in statement.targets:
        tr.absorb(target)


def prove_linear(statement: LinearStatement, secrets, rng,
                 label: str = "linear") -> LinearRelationProof:
    """Prover side; `secrets` must genuinely satisfy the statement."""
    group = _resolve_group(statement.targets[0])
    nonces = [group.random_scalar(rng) for _ in range(statement.n_secrets)]
    commitments = []
    for row in statement.bases:
        pairs = [(v, g) for v, g in zip(nonces, row) if g is not None]
        commitments.append(group.msm(pairs))
    tr = Transcript(group, label)
    _absorb_statement(tr, statement)
    tr.absorb(*commitments)
    c = tr.challenge()
    responses = tuple((v + c * y) % group.order for v, y in zip(nonces, secrets))
    return LinearRelationProof(statement, tuple(commitments), c, responses)


def verify_linear(proof: LinearRelationProof, label: str = "linear") -> bool:
    """True iff the challenge recomputes and every equation
    sum_i z_i*G_{j,i} == W_j + c*P_j holds."""
    statement = proof.statement
    if len(proof.commitments) != len(statement.targets):
        return False
    if len(proof.responses) != statement.n_secrets:
        return False
    group = _resolve_group(statement.targets[0])
    tr = Transcript(group, label)
    _absorb_statement(tr, statement)
    tr.absorb(*proof.commitments)
    if tr.challenge() != proof.challenge:
        return False
    c = proof.challenge
    for row, target, w in zip(statement.bases, statement.targets, proof.commitments):
        pairs = [(z, g) for z, g in zip(proof.responses, row) if g is not None]
        pairs.append((-c, target))
        if group.msm(pairs) != w:
            return False
    return True


def decode_linear(group, data: bytes) -> LinearRelationProof:
    try:
        reader = Reader(data)
        if reader.u8() != _TAG:
            raise MalformedProof("wrong proof type tag")
        n_eqs = reader.u32()
        n_secrets = reader.u32()
        if n_eqs == 0 or n_secrets == 0 or n_eqs > 64 or n_secrets > 64:
            raise MalformedProof("implausible proof shape")
        pb = group.point_bytes
        bases = []
        for _ in range(n_eqs):
            row = []
            for _ in range(n_secrets):
                flag = reader.u8()
                if flag == 1:
                    row.append(group.decode_point(reader.take(pb)))
                elif flag == 0:
                    row.append(None)
                else:
                    raise MalformedProof("non-canonical base flag")
            bases.append(tuple(row))
        targets = tuple(group.decode_point(reader.take(pb)) for _ in range(n_eqs))
        commitments = tuple(group.decode_point(reader.take(pb)) for _ in range(n_eqs))
        challenge = group.decode_scalar(reader.take(group.scalar_bytes))
        responses = tuple(
            group.decode_scalar(reader.take(group.scalar_bytes)) for _ in range(n_secrets)
        )
        reader.expect_done()
        return LinearRelationProof(
            LinearStatement(tuple(bases), targets), commitments, challenge, responses
        )
    except MalformedProof:
        raise
    except Exception as exc:
        raise MalformedProof(f"undecodable linear proof: {exc}") from exc
