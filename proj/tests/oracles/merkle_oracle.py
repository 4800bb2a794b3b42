#!/usr/bin/env python3
# Copyright 2026 The ctinet Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Standalone block-hash oracle for the ledger reorder test.

Builds the expected "network" chain of a fresh ledger (genesis block, then
one block of three PlaceOrder transactions) from first principles with
hashlib, and reports the merkle root both in commit order and with the first
two transactions swapped.

    python3 tests/oracles/merkle_oracle.py > tests/fixtures/merkle_vectors.json
"""

import hashlib
import json
import sys

WALL = 1700000000


def canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=False).encode()


def sha(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def tx_id(tx: dict) -> str:
    return sha(canonical(tx)).hex()


def merkle(ids):
    level = [bytes.fromhex(i) for i in ids]
    if not level:
        return sha(b"").hex()
    while len(level) > 1:
        if len(level) % 2:
            level.append(level[-1])
        level = [sha(level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0].hex()


def block_hash(height, channel, prev, root):
    return sha(canonical({"channel_id": channel, "height": height,
                          "merkle_root": root, "prev_hash": prev})).hex()


def main() -> None:
    genesis = {"actor": "system", "body": {"members": [], "op": "create", "tlp": "GREEN"},
               "channel_id": "network", "kind": "CreateChannel", "seq": 0,
               "timestamp": 0, "wall_time": WALL}
    g_root = merkle([tx_id(genesis)])
    g_hash = block_hash(0, "network", "0" * 64, g_root)

    # seq 1 is taken by the "public" channel genesis.
    txs = []
    for i in range(3):
        txs.append({"actor": "acct-a",
                    "body": {"consumer": "acct-a", "order_id": f"ord-{i}",
                             "submission_id": "cti-x"},
                    "channel_id": "network", "kind": "PlaceOrder", "seq": 2 + i,
                    "timestamp": 1 + i, "wall_time": WALL})
    ids = [tx_id(t) for t in txs]
    root = merkle(ids)
    swapped = merkle([ids[1], ids[0], ids[2]])
    doc = {
        "genesis_hash": g_hash,
        "tx_ids": ids,
        "merkle_root": root,
        "block_hash": block_hash(1, "network", g_hash, root),
        "swapped_merkle_root": swapped,
        "swapped_differs": swapped != root,
    }
    json.dump(doc, sys.stdout, indent=1)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
