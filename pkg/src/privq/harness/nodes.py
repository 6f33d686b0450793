"""Role runtimes: querier, computing node, data provider, verifying node.

All cross-node interaction goes through bus Messages. Per-query state
lives in small per-node dictionaries keyed by query id. Timeouts are
modeled by the bus idle callback: a CN missing DP responses proceeds
without them, a CN missing a peer CN's share aborts the query, and the
leader VN starts block assembly once traffic has drained.
"""

from __future__ import annotations

import hashlib
from types import SimpleNamespace

from .. import elgamal, ledger, protocols
from ..elgamal import Ciphertext
from ..encodings import (
    EncodedResponse,
    decode as decode_aggregate,
    encode_with_nonces,
    neutral_response,
    train_logreg,
)
from ..errors import CnUnavailable, PrivqError
from ..proofs import rangeproof
from ..proofs.linear import decode_linear, verify_linear
from ..proofs.shuffle import decode_shuffle, shuffle_and_prove, verify_shuffle
from ..proofs.signatures import sign, verify_signature
from ..serial import Reader, pack_bytes, pack_u32
from .bus import NodeBase
from .queryparse import apply_filter, decode_query

RESULT_ROUND = "result"


# ---------------------------------------------------------------------------
# payload codecs


def pack_cts(cts) -> bytes:
    return pack_u32(len(cts)) + b"".join(ct.encode() for ct in cts)


def unpack_cts(group, reader: Reader) -> list[Ciphertext]:
    n = reader.u32()
    out = []
    pb = group.point_bytes
    for _ in range(n):
        out.append(Ciphertext(group.decode_point(reader.take(pb)),
                              group.decode_point(reader.take(pb))))
    return out


def pack_response(resp: EncodedResponse) -> bytes:
    return pack_cts(list(resp.vector) + [resp.count])


def unpack_response(group, data: bytes) -> EncodedResponse:
    reader = Reader(data)
    cts = unpack_cts(group, reader)
    reader.expect_done()
    return EncodedResponse(cts[:-1], cts[-1])


def pack_labeled_inputs(labels, input_lists, output) -> bytes:
    out = [pack_u32(len(labels))]
    for label, cts in zip(labels, input_lists):
        out.append(pack_bytes(label.encode()))
        out.append(pack_cts(cts))
    out.append(pack_cts(output))
    return b"".join(out)


def unpack_labeled_inputs(group, data: bytes):
    reader = Reader(data)
    n = reader.u32()
    labels, inputs = [], []
    for _ in range(n):
        labels.append(reader.bytes_field().decode())
        inputs.append(tuple(unpack_cts(group, reader)))
    output = tuple(unpack_cts(group, reader))
    reader.expect_done()
    return labels, inputs, output


# ---------------------------------------------------------------------------
# querier


class QuerierNode(NodeBase):
    def __init__(self, identity, topology, rng, table):
        super().__init__(identity, topology, rng)
        self.table = table
        self.runs = {}

    def start(self, query):
        state = SimpleNamespace(query=query, result=None, error=None,
                                block=None, raw_values=None)
        self.runs[query.query_id] = state
        body = query.encode()
        signature = sign(self.topology.group, self.topology.keys[self.identity].private, body)
        for cn in self.topology.cn_ids:
            self.send(query.query_id, "query", cn, body)
        signed = pack_bytes(body) + pack_bytes(signature)
        for vn in self.topology.vn_ids:
            self.send(query.query_id, "query_vn", vn, signed)
        return state

    def on_result(self, msg):
        state = self.runs[msg.query_id]
        group = self.topology.group
        response = unpack_response(group, msg.payload)
        sk = self.topology.keys[self.identity].private
        op = state.query.operation
        try:
            count = elgamal.decrypt(group, response.count, sk, self.table)
            if op.zero_test_only:
                values = [
                    0 if elgamal.decrypt_point(group, ct, sk).is_identity() else 1
                    for ct in response.vector
                ]
            else:
                values = [elgamal.decrypt(group, ct, sk, self.table)
                          for ct in response.vector]
            state.raw_values = (values, count)
            state.result = decode_aggregate(op, values, count)
            if op.kind == "log_reg" and count > 0:
                train = state.query.params.get("train", {})
                state.result.flags["model"] = train_logreg(
                    state.result.values, count, op.feature_count, op.approx_degree,
                    lam=train.get("lambda", 0.0),
                    learning_rate=train.get("learning_rate", 0.1),
                    max_iter=train.get("max_iter", 100),
                )
        except PrivqError as exc:
            state.error = exc

    def on_abort(self, msg):
        self.runs[msg.query_id].error = CnUnavailable(msg.payload.decode())

    def on_block_commit(self, msg):
        self.runs[msg.query_id].block = ledger.Block.decode(msg.payload)


# ---------------------------------------------------------------------------
# data provider


class DpNode(NodeBase):
    def __init__(self, identity, topology, rng, range_sigs=None,
                 decline=False, malicious_value=None):
        super().__init__(identity, topology, rng)
        self.range_sigs = range_sigs
        self.decline = decline
        self.malicious_value = malicious_value

    def _records(self, query):
        rows = apply_filter(self.topology.dp_data.get(self.identity, []), query.filter)
        exists = query.params.get("exists_range")
        if exists is not None and query.operation.kind == "or":
            lo, hi = exists
            attr = query.attributes[0]
            bit = any(lo <= row.get(attr, lo - 1) < hi for row in rows)
            return [(1 if bit else 0,)]
        records = []
        for row in rows:
            if all(attr in row for attr in query.attributes):
                records.append(tuple(row[attr] for attr in query.attributes))
        return records

    def on_query(self, msg):
        query = decode_query(msg.payload)
        if self.identity not in query.dp_list:
            return
        group = self.topology.group
        pk = self.topology.collective_key().public
        op = query.operation
        if self.decline:
            response = neutral_response(group, op, pk, self.rng)
            self.send(query.query_id, "dp_response", msg.sender, pack_response(response))
            return
        records = self._records(query)
        response, raws, nonces = encode_with_nonces(
            group, op, records, pk, self.rng,
            max_message=self.topology.max_message)
        if self.malicious_value is not None and response.vector:
            # substitute an out-of-range element 0 with a forged-digit proof
            bad = int(self.malicious_value)
            nonce = group.random_scalar(self.rng)
            response = EncodedResponse(
                [elgamal.encrypt_with_nonce(group, bad, pk, nonce)] + response.vector[1:],
                response.count,
            )
            raws = [bad] + raws[1:]
            nonces = [nonce] + nonces[1:]
        if query.bounds is not None and self.range_sigs is not None:
            self._emit_range_proofs(query, op, pk, raws, nonces, response)
        self.send(query.query_id, "dp_response", msg.sender, pack_response(response))

    def _emit_range_proofs(self, query, op, pk, raws, nonces, response):
        # two complementary shifted proofs per element pin the exact range
        group = self.topology.group
        sk = self.topology.keys[self.identity].private
        for j, (raw, nonce, bounds) in enumerate(zip(raws, nonces, op.element_bounds())):
            u = 2 if bounds[1] - bounds[0] <= 2 else rangeproof.DEFAULT_DIGIT_BASE
            u, l = rangeproof.range_params(bounds, u)
            proofs = []
            for shifted in (raw - bounds[0], raw - bounds[1] + u**l):
                if 0 <= shifted < u**l:
                    proofs.append(rangeproof.prove_range(
                        group, shifted, nonce, pk, self.range_sigs, l, self.rng))
                else:
                    # out-of-range input: forged digits cannot verify
                    proofs.append(rangeproof.prove_range_unchecked(
                        group, shifted, nonce, pk, self.range_sigs, l, self.rng))
            payload = (pack_u32(j) + pack_bytes(response.vector[j].encode())
                       + pack_bytes(proofs[0].encode()) + pack_bytes(proofs[1].encode()))
            bundle = ledger.ProofBundle(query.query_id, self.identity, "range",
                                        j, (payload,)).signed(group, sk)
            for vn in self.topology.vn_ids:
                self.send(query.query_id, "proof_bundle", vn, bundle.encode())


# ---------------------------------------------------------------------------
# computing node


class CnNode(NodeBase):
    def __init__(self, identity, topology, rng, noise=None):
        super().__init__(identity, topology, rng)
        self.tree = protocols.build_tree(topology.cn_ids, topology.tree_shape)
        self.index = self.tree.nodes.index(identity)
        self.is_root = self.index == 0
        self.noise = noise  # pre-generated NoiseList for eager CDP, root only
        self.states = {}
        self._stash = {}

    def _state(self, query_id):
        return self.states[query_id]

    def handle(self, msg):
        # messages may overtake the query broadcast on other links; park them
        if msg.round != "query" and msg.query_id not in self.states:
            self._stash.setdefault(msg.query_id, []).append(msg)
            return
        super().handle(msg)

    def _parent(self):
        p = self.tree.parents[self.index]
        return self.tree.nodes[p] if p >= 0 else None

    def _children(self):
        return [self.tree.nodes[i] for i in self.tree.children(self.index)]

    def on_query(self, msg):
        query = decode_query(msg.payload)
        my_dps = tuple(dp for dp in query.dp_list
                       if self.topology.dp_assignment.get(dp) == self.identity)
        self.states[query.query_id] = SimpleNamespace(
            query=query,
            expected_dps=set(my_dps),
            inputs=[],  # (label, ct tuple) pairs: DP responses and child partials
            pending_children=set(self._children()),
            aggregated=False,
            stage="collect",
            share_waits={},  # round tag -> set of children still pending
            share_sums={},  # round tag -> list of summed share ct-pairs
            round_cts={},  # round tag -> input cts of the round
            current=None,  # root: current EncodedResponse through the stages
            timed_out_dps=set(),
        )
        for dp in my_dps:
            self.send(query.query_id, "query", dp, msg.payload)
        self._try_finish_collect(query.query_id)
        for parked in self._stash.pop(query.query_id, []):
            super().handle(parked)

    def on_dp_response(self, msg):
        state = self._state(msg.query_id)
        response = unpack_response(self.topology.group, msg.payload)
        state.inputs.append((msg.sender, tuple(response.vector) + (response.count,)))
        state.expected_dps.discard(msg.sender)
        self._try_finish_collect(msg.query_id)

    def on_cta_partial(self, msg):
        state = self._state(msg.query_id)
        reader = Reader(msg.payload)
        cts = tuple(unpack_cts(self.topology.group, reader))
        state.inputs.append((msg.sender, cts))
        state.pending_children.discard(msg.sender)
        self._try_finish_collect(msg.query_id)

    def _try_finish_collect(self, query_id):
        state = self._state(query_id)
        if state.aggregated or state.expected_dps or state.pending_children:
            return
        if not state.inputs:
            # nothing from below and no local DPs: contribute a neutral zero
            group = self.topology.group
            pk = self.topology.collective_key().public
            dim = state.query.operation.dimension
            zeros = tuple(elgamal.encrypt(group, 0, pk, self.rng) for _ in range(dim + 1))
            state.inputs.append((self.identity + "/neutral", zeros))
        state.aggregated = True
        labels = [label for label, _ in state.inputs]
        input_lists = [cts for _, cts in state.inputs]
        width = len(input_lists[0])
        total = tuple(
            self._ct_sum([cts[j] for cts in input_lists]) for j in range(width)
        )
        self._emit_bundle(query_id, "aggregation", 0,
                          (pack_labeled_inputs(labels, input_lists, total),))
        parent = self._parent()
        if parent is not None:
            self.send(query_id, "cta_partial", parent, pack_cts(list(total)))
            state.stage = "done"
            return
        state.current = EncodedResponse(list(total[:-1]), total[-1])
        self._advance_root(query_id)

    @staticmethod
    def _ct_sum(cts):
        total = cts[0]
        for ct in cts[1:]:
            total = total + ct
        return total

    # ----- root stage machine -----

    def _advance_root(self, query_id):
        state = self._state(query_id)
        op = state.query.operation
        if state.stage == "collect":
            if op.uses_obfuscation:
                state.stage = "cto"
                self._start_tree_round(query_id, "cto", list(state.current.vector))
                return
            state.stage = "cto_done"
        if state.stage == "cto_done":
            if state.query.dp_privacy:
                state.stage = "cdp"
                self._start_cdp(query_id)
                return
            state.stage = "cdp_done"
        if state.stage == "cdp_done":
            state.stage = "ctks"
            cts = list(state.current.vector) + [state.current.count]
            self._start_tree_round(query_id, "ctks", cts)

    def _start_tree_round(self, query_id, tag, cts):
        state = self._state(query_id)
        state.round_cts[tag] = cts
        payload = pack_bytes(tag.encode()) + pack_cts(cts)
        for child in self._children():
            self.send(query_id, "round_request", child, payload)
        state.share_waits[tag] = set(self._children())
        state.share_sums[tag] = self._own_shares(query_id, tag, cts)
        self._try_finish_round(query_id, tag)

    def _own_shares(self, query_id, tag, cts):
        """This CN's share pairs for the round, with the proof bundle emitted."""
        group = self.topology.group
        target_pk = self.topology.keys[self.topology.querier_id].public
        shares, payloads = [], []
        for ct in cts:
            if tag == "ctks":
                w1, w2, proof = protocols.ctks_share(
                    group, ct.c1, self.topology.keys[self.identity], target_pk, self.rng)
                shares.append((w1, w2))
            else:
                blinded, proof = protocols.cto_share(group, ct, self.rng)
                shares.append((blinded.c1, blinded.c2))
            payloads.append(pack_bytes(ct.encode()) + proof.encode())
        self._emit_bundle(query_id, "keyswitch" if tag == "ctks" else "obfuscation",
                          0, tuple(payloads))
        return shares

    def on_round_request(self, msg):
        reader = Reader(msg.payload)
        tag = reader.bytes_field().decode()
        cts = unpack_cts(self.topology.group, reader)
        state = self._state(msg.query_id)
        state.round_cts[tag] = cts
        payload = pack_bytes(tag.encode()) + pack_cts(cts)
        for child in self._children():
            self.send(msg.query_id, "round_request", child, payload)
        state.share_waits[tag] = set(self._children())
        state.share_sums[tag] = self._own_shares(msg.query_id, tag, cts)
        self._try_finish_round(msg.query_id, tag)

    def on_round_share(self, msg):
        reader = Reader(msg.payload)
        tag = reader.bytes_field().decode()
        pairs = unpack_cts(self.topology.group, reader)  # share pairs ride as cts
        state = self._state(msg.query_id)
        sums = state.share_sums[tag]
        for j, pair in enumerate(pairs):
            w1, w2 = sums[j]
            sums[j] = (w1 + pair.c1, w2 + pair.c2)
        state.share_waits[tag].discard(msg.sender)
        self._try_finish_round(msg.query_id, tag)

    def _try_finish_round(self, query_id, tag):
        state = self._state(query_id)
        if state.share_waits.get(tag):
            return
        sums = state.share_sums[tag]
        parent = self._parent()
        if parent is not None:
            payload = pack_bytes(tag.encode()) + pack_cts(
                [Ciphertext(w1, w2) for w1, w2 in sums])
            self.send(query_id, "round_share", parent, payload)
            return
        cts = state.round_cts[tag]
        if tag == "ctks":
            switched = [Ciphertext(sums[j][0], cts[j].c2 + sums[j][1])
                        for j in range(len(cts))]
            state.current = EncodedResponse(switched[:-1], switched[-1])
            state.stage = "done"
            self.send(query_id, RESULT_ROUND, self.topology.querier_id,
                      pack_response(state.current))
            for vn in self.topology.vn_ids:
                self.send(query_id, "end_query", vn)
        else:  # cto: shares are the blinded ciphertext sums themselves
            blinded = [Ciphertext(w1, w2) for w1, w2 in sums]
            state.current = EncodedResponse(blinded, state.current.count)
            state.stage = "cto_done"
            self._advance_root(query_id)

    # ----- collective differential privacy -----

    def _start_cdp(self, query_id):
        state = self._state(query_id)
        group = self.topology.group
        pk = self.topology.collective_key().public
        if self.noise is not None and self.is_root:
            # eager mode: noise generated ahead of the query; every CN signs
            # and publishes its own pre-computed shuffle proof under this query
            noise, steps = self.noise
            for step in steps:
                payload = b"".join(pack_bytes(p) for p in step.payloads)
                self.send(query_id, "cdp_replay", step.cn_id, payload)
            state.current = protocols.cdp_apply(state.current, noise)
            state.stage = "cdp_done"
            self._advance_root(query_id)
            return
        params = self.topology.cdp_params
        values = protocols.quantize_laplace(
            params.get("epsilon", 1.0), params.get("delta_f", 1.0),
            params.get("theta", 0.5), params.get("list_size", 100))
        raws = [elgamal.fixed_encode(v, self.topology.scale).raw for v in values]
        initial = [elgamal.encrypt_with_nonce(group, m, pk, 0) for m in raws]
        self.send(query_id, "cdp_pass", self.tree.nodes[0], pack_cts(initial))

    def on_cdp_pass(self, msg):
        group = self.topology.group
        pk = self.topology.collective_key().public
        reader = Reader(msg.payload)
        cts = unpack_cts(group, reader)
        outputs, proof = shuffle_and_prove(group, cts, pk, self.rng)
        self._emit_bundle(msg.query_id, "shuffle", 0, (proof.encode(),))
        pos = self.index
        if pos + 1 < len(self.tree.nodes):
            self.send(msg.query_id, "cdp_pass", self.tree.nodes[pos + 1],
                      pack_cts(list(outputs)))
        else:
            self.send(msg.query_id, "cdp_done", self.tree.nodes[0],
                      pack_cts(list(outputs)))

    def on_cdp_replay(self, msg):
        reader = Reader(msg.payload)
        payloads = []
        while not reader.done():
            payloads.append(reader.bytes_field())
        self._emit_bundle(msg.query_id, "shuffle", 0, tuple(payloads))

    def on_cdp_done(self, msg):
        state = self._state(msg.query_id)
        group = self.topology.group
        reader = Reader(msg.payload)
        cts = unpack_cts(group, reader)
        noise = protocols.NoiseList(0, 0, 0, [], cts)
        state.current = protocols.cdp_apply(state.current, noise)
        state.stage = "cdp_done"
        self._advance_root(msg.query_id)

    # ----- plumbing -----

    def _emit_bundle(self, query_id, proof_type, seq_index, payloads):
        group = self.topology.group
        bundle = ledger.ProofBundle(query_id, self.identity, proof_type, seq_index,
                                    payloads).signed(
            group, self.topology.keys[self.identity].private)
        for vn in self.topology.vn_ids:
            self.send(query_id, "proof_bundle", vn, bundle.encode())

    def on_idle(self, level: int = 0):
        for query_id, state in self.states.items():
            if state.stage in ("done", "failed"):
                continue
            if not state.aggregated:
                if state.expected_dps:
                    # unresponsive DPs only reduce the number of responses
                    state.timed_out_dps |= state.expected_dps
                    state.expected_dps = set()
                    self._try_finish_collect(query_id)
                if (level >= 1 and not state.aggregated and state.pending_children):
                    self._abort(query_id, state,
                                f"unresponsive CNs: {sorted(state.pending_children)}")
                continue
            if level >= 1 and (any(state.share_waits.values())
                               or state.stage in ("cto", "ctks", "cdp")):
                self._abort(query_id, state, f"round stalled in stage {state.stage}")

    def _abort(self, query_id, state, reason):
        state.stage = "failed"
        self.send(query_id, "abort", self.topology.querier_id, reason.encode())


# ---------------------------------------------------------------------------
# verifying node


class VnNode(NodeBase):
    def __init__(self, identity, topology, rng, policy, range_sigs=None):
        super().__init__(identity, topology, rng)
        self.policy = policy
        self.range_sigs = range_sigs
        self.chain = ledger.Chain()
        self.kv = {}  # proof key -> ProofBundle, every received proof is stored
        self.states = {}
        self._stash = {}

    def handle(self, msg):
        if msg.round != "query_vn" and msg.query_id not in self.states:
            self._stash.setdefault(msg.query_id, []).append(msg)
            return
        super().handle(msg)

    # ----- query intake and proof verification -----

    def _view(self):
        return SimpleNamespace(cn_ids=self.topology.cn_ids, range_sigs=self.range_sigs)

    def on_query_vn(self, msg):
        reader = Reader(msg.payload)
        body = reader.bytes_field()
        signature = reader.bytes_field()
        group = self.topology.group
        querier_pk = self.topology.keys[self.topology.querier_id].public
        if not verify_signature(group, querier_pk, body, signature):
            return
        query = decode_query(body)
        expected = ledger.expected_proofs(query, self._view())
        self.states[query.query_id] = SimpleNamespace(
            query=query,
            query_bytes=body,
            map=ledger.QueryProofsMap(expected),
            ended=False,
            assembling=False,
            collected_maps={},
            signatures={},
            block=None,
            dp_range_cts={},  # dp -> {element index -> Ciphertext}
            agg_inputs={},  # dp -> ct tuple seen in a CN aggregation proof
            round_ct_hash={},  # "keyswitch"/"obfuscation" -> first-seen input hash
            shuffle_io={},  # cn index -> (inputs enc, outputs enc)
        )
        for parked in self._stash.pop(query.query_id, []):
            super().handle(parked)

    def on_proof_bundle(self, msg):
        try:
            bundle = ledger.ProofBundle.decode(msg.payload)
        except PrivqError:
            return
        state = self.states.get(bundle.query_id)
        if state is None:
            return
        key = bundle.key
        self.kv[key] = bundle  # stored regardless of verification
        prover_key = self.topology.keys.get(bundle.prover_id)
        group = self.topology.group
        if prover_key is None or not verify_signature(
            group, prover_key.public, bundle.body_bytes(), bundle.signature
        ):
            state.map.record(key, ledger.STATUS_FALSE)
            return
        status = ledger.probabilistic_verify(
            bundle, self.policy, self.rng,
            lambda i: self._verify_sub(state, bundle, i),
        )
        state.map.record(key, status)

    def _verify_sub(self, state, bundle, index) -> bool:
        try:
            handler = {
                "range": self._check_range,
                "aggregation": self._check_aggregation,
                "keyswitch": self._check_keyswitch,
                "obfuscation": self._check_obfuscation,
                "shuffle": self._check_shuffle,
            }.get(bundle.proof_type)
            if handler is None:
                return False
            return handler(state, bundle, index)
        except (PrivqError, ValueError, IndexError, KeyError):
            return False

    def _check_range(self, state, bundle, index) -> bool:
        if self.range_sigs is None:
            return False
        group = self.topology.group
        reader = Reader(bundle.payloads[index])
        j = reader.u32()
        ct = elgamal.decode_ciphertext(group, reader.bytes_field())
        proof_lo = rangeproof.decode_range(group, reader.bytes_field())
        proof_hi = rangeproof.decode_range(group, reader.bytes_field())
        reader.expect_done()
        op = state.query.operation
        bounds = op.element_bounds()[j]
        u = 2 if bounds[1] - bounds[0] <= 2 else rangeproof.DEFAULT_DIGIT_BASE
        u, l = rangeproof.range_params(bounds, u)
        omega = self.topology.collective_key().public
        base = group.base()
        state.dp_range_cts.setdefault(bundle.prover_id, {})[j] = ct
        seen = state.agg_inputs.get(bundle.prover_id)
        if seen is not None and j < len(seen) and seen[j] != ct:
            return False  # proved one ciphertext, submitted another
        for proof, shift in ((proof_lo, bounds[0]), (proof_hi, bounds[1] - u**l)):
            if (proof.u, proof.l) != (u, l):
                return False
            if proof.c2 != ct.c2 - group.mul(shift, base):
                return False
            if not rangeproof.verify_range(proof, self.range_sigs, omega):
                return False
        return True

    def _check_aggregation(self, state, bundle, index) -> bool:
        group = self.topology.group
        labels, inputs, output = unpack_labeled_inputs(group, bundle.payloads[index])
        ok = protocols.verify_aggregation(protocols.AggregationProof(tuple(inputs), output))
        for label, cts in zip(labels, inputs):
            if label in state.query.dp_list:
                state.agg_inputs[label] = cts
                proven = state.dp_range_cts.get(label, {})
                for j, proven_ct in proven.items():
                    if j < len(cts) and cts[j] != proven_ct:
                        key = ledger.proof_key(state.query.query_id, label, "range", j)
                        state.map.record(key, ledger.STATUS_FALSE)
        return ok

    def _round_payload(self, state, bundle, index, tag):
        group = self.topology.group
        reader = Reader(bundle.payloads[index])
        ct = elgamal.decode_ciphertext(group, reader.bytes_field())
        proof = decode_linear(group, reader.rest())
        # all CNs must run the round over the same ciphertext list
        digest = hashlib.sha256(
            b"".join(Reader(p).bytes_field() for p in bundle.payloads)
        ).hexdigest()
        first = state.round_ct_hash.setdefault(tag, digest)
        if first != digest:
            return None, None
        return ct, proof

    def _check_keyswitch(self, state, bundle, index) -> bool:
        group = self.topology.group
        ct, proof = self._round_payload(state, bundle, index, "keyswitch")
        if ct is None:
            return False
        st = proof.statement
        base = group.base()
        target_pk = self.topology.keys[self.topology.querier_id].public
        cn_pub = self.topology.keys[bundle.prover_id].public
        if st.bases != ((base, None), (None, base), (-ct.c1, target_pk)):
            return False
        if st.targets[0] != cn_pub:
            return False
        return verify_linear(proof)

    def _check_obfuscation(self, state, bundle, index) -> bool:
        ct, proof = self._round_payload(state, bundle, index, "obfuscation")
        if ct is None:
            return False
        st = proof.statement
        if st.bases != ((ct.c1,), (ct.c2,)) or st.n_secrets != 1:
            return False
        return verify_linear(proof)

    def _check_shuffle(self, state, bundle, index) -> bool:
        group = self.topology.group
        proof = decode_shuffle(group, bundle.payloads[index])
        collective = self.topology.collective_key().public
        if proof.omega != collective:
            return False
        position = list(self.topology.cn_ids).index(bundle.prover_id)
        inputs_enc = tuple(ct.encode() for ct in proof.inputs)
        outputs_enc = tuple(ct.encode() for ct in proof.outputs)
        state.shuffle_io[position] = (inputs_enc, outputs_enc)
        if position == 0:
            if inputs_enc != self._canonical_noise_list(state):
                return False
        else:
            prev = state.shuffle_io.get(position - 1)
            if prev is not None and prev[1] != inputs_enc:
                return False
        return verify_shuffle(proof)

    def _canonical_noise_list(self, state):
        group = self.topology.group
        pk = self.topology.collective_key().public
        params = self.topology.cdp_params
        values = protocols.quantize_laplace(
            params.get("epsilon", 1.0), params.get("delta_f", 1.0),
            params.get("theta", 0.5), params.get("list_size", 100))
        return tuple(
            elgamal.encrypt_with_nonce(
                group, elgamal.fixed_encode(v, self.topology.scale).raw, pk, 0
            ).encode()
            for v in values
        )

    # ----- block assembly -----

    def _leader_for(self, height: int) -> str:
        vns = list(self.topology.vn_ids)
        return vns[height % len(vns)]

    def on_end_query(self, msg):
        state = self.states.get(msg.query_id)
        if state is not None:
            state.ended = True

    def on_idle(self, level: int = 0):
        for query_id, state in self.states.items():
            if (state.ended and not state.assembling and state.block is None
                    and self._leader_for(len(self.chain)) == self.identity):
                state.assembling = True
                state.collected_maps[self.identity] = state.map
                for vn in self.topology.vn_ids:
                    if vn != self.identity:
                        self.send(query_id, "map_request", vn)
                self._maybe_assemble(query_id)

    def on_map_request(self, msg):
        state = self.states.get(msg.query_id)
        if state is not None:
            self.send(msg.query_id, "map_submit", msg.sender, state.map.encode())

    def on_map_submit(self, msg):
        state = self.states.get(msg.query_id)
        if state is None or not state.assembling:
            return
        state.collected_maps[msg.sender] = ledger.QueryProofsMap.decode(
            Reader(msg.payload))
        self._maybe_assemble(msg.query_id)

    def _maybe_assemble(self, query_id):
        state = self.states[query_id]
        if len(state.collected_maps) < len(self.topology.vn_ids) or state.block:
            return
        block = ledger.Block(len(self.chain), query_id, state.query_bytes,
                             dict(state.collected_maps), self.chain.head_hash())
        state.block = block
        for vn in self.topology.vn_ids:
            self.send(query_id, "block_sign_request", vn, block.encode())

    def on_block_sign_request(self, msg):
        state = self.states.get(msg.query_id)
        if state is None:
            return
        block = ledger.Block.decode(msg.payload)
        group = self.topology.group
        recorded = block.maps.get(self.identity)
        signature = b""
        if recorded is not None and recorded == state.map:
            signature = sign(group, self.topology.keys[self.identity].private,
                             block.body_bytes())
        self.send(msg.query_id, "block_signature", msg.sender, signature)

    def on_block_signature(self, msg):
        state = self.states.get(msg.query_id)
        if state is None or state.block is None:
            return
        state.signatures[msg.sender] = msg.payload
        if len(state.signatures) < len(self.topology.vn_ids):
            return
        block = state.block
        block.signatures = {vn: sig for vn, sig in state.signatures.items() if sig}
        if len(block.signatures) < self.policy.f_h:
            self.send(msg.query_id, "abort", self.topology.querier_id,
                      f"only {len(block.signatures)} block signatures".encode())
            return
        encoded = block.encode()
        for vn in self.topology.vn_ids:
            if vn != self.identity:
                self.send(msg.query_id, "block_commit", vn, encoded)
        self.send(msg.query_id, "block_commit", self.topology.querier_id, encoded)
        self.chain.append(block)

    def on_block_commit(self, msg):
        block = ledger.Block.decode(msg.payload)
        self.chain.append(block)
        state = self.states.get(msg.query_id)
        if state is not None:
            # a committed block closes the query on every VN
            state.assembling = True
            state.block = block


class MultiRoleNode(NodeBase):
    """One physical node hosting several roles under a single identity."""

    def __init__(self, parts):
        self.parts = parts
        first = parts[0]
        super().__init__(first.identity, first.topology, first.rng)

    @property
    def bus(self):
        return self._bus

    @bus.setter
    def bus(self, value):
        self._bus = value
        for part in getattr(self, "parts", ()):
            part.bus = value

    def handle(self, msg):
        for part in self.parts:
            if hasattr(part, "on_" + msg.round):
                part.handle(msg)
                return
        super().handle(msg)  # raises the no-handler error

    def on_idle(self, level: int = 0):
        for part in self.parts:
            part.on_idle(level)
