#!/usr/bin/env python3
"""Serve the gateway over a freshly generated synthetic library.

Usage: python scripts/serve_demo.py [--port 8080] [--records 300] [--seed 7]
Then try:
  curl localhost:8080/api/recommend/popularnear?x=200&y=150
"""

import argparse
import tempfile
from pathlib import Path

from stackrec import corpus, harness, lccn, locate, stacksmap
from stackrec.gateway import Gateway, TransactionLog, make_server
from stackrec.recommend import Recommender


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--port", type=int, default=8080)
    ap.add_argument("--records", type=int, default=300)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--log", default=None, help="transaction log path")
    args = ap.parse_args()

    fixture_dir = Path(tempfile.mkdtemp(prefix="stackrec_demo_"))
    fixtures = harness.gen_corpus(args.seed, args.records, out_dir=fixture_dir)
    store = corpus.load_corpus(
        fixtures.catalog, fixtures.circulation, fixtures.articles, fixtures.databases
    )
    stack = stacksmap.load_stackmap(fixtures.stackmap)
    outline = lccn.load_outline(fixtures.outline)
    beacons = locate.load_beacons(fixtures.beacons)

    log_path = Path(args.log) if args.log else fixture_dir / "gateway.jsonl"
    txn_log = TransactionLog(log_path)
    gw = Gateway(
        stack, store, outline, txn_log, beacons=beacons,
        recommender=Recommender(stack, store, outline),
    )
    server = make_server(gw, host="127.0.0.1", port=args.port)
    ext = stack.map_extent
    print(f"{len(store.records)} records on {len(stack.shelves)} shelves, "
          f"extent ({ext.x_min:.0f},{ext.y_min:.0f})-({ext.x_max:.0f},{ext.y_max:.0f})")
    print(f"serving on http://127.0.0.1:{args.port}  (log: {log_path})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        txn_log.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
