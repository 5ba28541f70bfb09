"""Hand ledger for the 2-commodity, 6-day fixture, in plain Python.

Outright front-contract book, rebalanced daily to the weights in
weights.csv. The front contract of a commodity is the nearest expiry whose
roll date has not been reached; the roll date is the last trading day of
the month before the expiry month, and from that close onwards the next
contract is held. aaa rolls AAAH20 -> AAAJ20 at the 2020-02-28 close.

Per day t (rows dated t, t = day 2..6):
  gross_t    = sum_c w_{t-1}(c) * (F_t(c) / F_{t-1}(c) - 1)
  drift_t(c) = w_{t-1}(c) * (F_t(c) / F_{t-1}(c) - 1 + 1)
  TO_t(c)    = |w_t(c) - drift_t(c)|   (a contract not held counts as 0)
  net_t      = gross_t - 0.5 * sum_c TO_t(c) * TC_t(c)
  TC1 = 1.5 / (F M), TC2 = 0.000167, TC3 = (1.5 + 0.25 tick M) / (F M)
with F the contract's own settle on day t.

Run from this directory: ``python3 hand_ledger.py`` rewrites expected.csv.
"""

import csv

DATES = ["2020-02-25", "2020-02-26", "2020-02-27", "2020-02-28", "2020-03-02", "2020-03-03"]
SPEC = {"aaa": (1000.0, 0.01), "bbb": (100.0, 0.1)}

# front contract per date, worked out by hand from the expiry table
FRONT = {
    "aaa": {"2020-02-25": "AAAH20", "2020-02-26": "AAAH20", "2020-02-27": "AAAH20",
            "2020-02-28": "AAAJ20", "2020-03-02": "AAAJ20", "2020-03-03": "AAAJ20"},
    "bbb": {d: "BBBM20" for d in DATES},
}


def read_prices(name):
    out = {}
    with open(name + ".csv") as fh:
        for row in csv.DictReader(fh):
            out[(row["contract_code"], row["date"])] = float(row["settle"])
    return out


def main():
    prices = {cid: read_prices(cid) for cid in SPEC}
    weights = {}
    with open("weights.csv") as fh:
        for row in csv.DictReader(fh):
            weights[row["date"]] = {cid: float(row[cid]) for cid in SPEC}

    def held(date):
        return {(cid, FRONT[cid][date]): weights[date][cid] for cid in SPEC}

    rows = []
    for i in range(1, len(DATES)):
        prev, today = DATES[i - 1], DATES[i]
        w_prev, w_now = held(prev), held(today)
        gross = 0.0
        drift = {}
        for (cid, code), w in w_prev.items():
            r = prices[cid][(code, today)] / prices[cid][(code, prev)] - 1.0
            gross += w * r
            drift[(cid, code)] = w * (1.0 + r)
        turnover = 0.0
        cost = {"tc1": 0.0, "tc2": 0.0, "tc3": 0.0}
        for key in sorted(set(drift) | set(w_now)):
            cid, code = key
            to = abs(w_now.get(key, 0.0) - drift.get(key, 0.0))
            turnover += to
            mult, tick = SPEC[cid]
            f = prices[cid][(code, today)]
            cost["tc1"] += to * 1.5 / (f * mult)
            cost["tc2"] += to * 0.000167
            cost["tc3"] += to * (1.5 + 0.25 * tick * mult) / (f * mult)
        rows.append([today, gross, turnover] + [gross - 0.5 * cost[k] for k in ("tc1", "tc2", "tc3")])

    with open("expected.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["date", "gross", "turnover", "net_tc1", "net_tc2", "net_tc3"])
        for r in rows:
            w.writerow([r[0]] + [repr(x) for x in r[1:]])


if __name__ == "__main__":
    main()
