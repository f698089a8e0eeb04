#!/usr/bin/env python3
"""Regenerate testdata/sim_reports from construction parameters.

Each case is built from a list of events. The expected fields are computed
here from those events, never by running the Rust parser.
"""
import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "testdata" / "sim_reports"


def passed(i):
    return ("line", f"Test {i} passed!"), ("passed", i)


def mismatch(kind, pos, inputs, gen, ref):
    text = (f"Mismatch at {kind} {pos}: Inputs = [{', '.join(inputs)}], "
            f"Generated = [{', '.join(gen)}], Reference = [{', '.join(ref)}]")
    rec = {"position_kind": kind, "position": pos, "inputs": inputs,
           "generated": gen, "reference": ref}
    return ("line", text), ("mismatch", rec)


def noise(text):
    return ("line", text), None


def summary(m, t):
    return ("line", f"{m} mismatches out of {t} total tests."), ("summary", (m, t))


def all_passed():
    return ("line", "All Tests passed! Testbench ran successfully."), ("all", None)


def build(events, eol="\n"):
    lines, p, mm, summ, allp = [], [], [], None, False
    for (_, text), meaning in events:
        lines.append(text)
        if meaning is None:
            continue
        kind, val = meaning
        if kind == "passed":
            p.append(val)
        elif kind == "mismatch":
            mm.append(val)
        elif kind == "summary":
            summ = val
        elif kind == "all":
            allp = True
    text = eol.join(lines) + (eol if lines else "")
    if summ is None and not allp:
        return text, {"error": "NoSummary"}
    m, t = summ if summ is not None else (0, len(p))
    if len(mm) > m:
        m = len(mm)
        t = max(t, m)
    return text, {"passed_tests": p, "mismatches": mm, "mismatch_count": m,
                  "total_tests": t, "all_passed": m == 0}


def bits(v, w):
    return format(v, f"0{w}b")


CASES = {}

# Verbatim feedback excerpt for the vector concatenation problem.
CASES["concat_excerpt"] = [
    noise("..."),
    passed(12),
    mismatch("clk", 13,
             ["00000", "00000", "00000", "00000", "00001", "00000"],
             ["00000000", "00000000", "00000001", "00000011"],
             ["00000000", "00000000", "00000000", "10000011"]),
    noise("..."),
    mismatch("clk", 25,
             ["11111", "00000", "11111", "00000", "11111", "00000"],
             ["11110000", "01111100", "00011111", "00000011"],
             ["11111000", "00111110", "00001111", "10000011"]),
    summary(13, 26),
]

# Verbatim index-addressed excerpt with more mismatches than listed lines.
_idx = []
_rows = {
    5: (["0000000000000101", "0000000000000101", "0"], ["0", "0000000000000000"], ["0", "0000000000010000"]),
    7: (["0000000010011001", "0000000000000001", "0"], ["0", "0000000010011000"], ["0", "0000000100000000"]),
    9: (["1001100110011001", "0000000000000001", "0"], ["0", "1001100110011000"], ["1", "0000000000000000"]),
    11: (["0000000000000001", "1001100110011001", "0"], ["0", "1001100110011000"], ["1", "0000000000000000"]),
    15: (["0000000010011000", "0000000000000001", "1"], ["1", "0000000010011001"], ["0", "0000000100000000"]),
    17: (["0100010001000100", "0101010101010101", "0"], ["0", "0001000100010001"], ["0", "1001100110011001"]),
    19: (["0100010001000100", "0101010101010101", "1"], ["1", "0001000100010001"], ["1", "0000000000000000"]),
}
for i in list(range(5, 13)) + [13, 14] + list(range(15, 21)):
    if i in (13, 14):
        _idx.append(passed(i))
    else:
        key = i if i in _rows else i - 1
        _idx.append(mismatch("index", i, *_rows[key]))
_idx.append(summary(16, 21))
CASES["adder_index_excerpt"] = _idx

CASES["all_passed_with_tests"] = [passed(i) for i in range(1, 6)] + [all_passed()]
CASES["all_passed_bare"] = [all_passed()]
CASES["zero_mismatch_summary"] = [passed(i) for i in range(1, 4)] + [summary(0, 3)]
CASES["all_fail"] = [mismatch("clk", i, [bits(i, 4)], [bits(i, 4)], [bits(i + 1, 4)])
                     for i in range(1, 5)] + [summary(4, 4)]
CASES["interleaved"] = []
for i in range(1, 11):
    CASES["interleaved"].append(
        mismatch("clk", i, [bits(i, 3), "1"], [bits(i * 3 % 8, 3)], [bits(i * 5 % 8, 3)])
        if i % 3 == 0 else passed(i))
CASES["interleaved"].append(summary(3, 10))
CASES["no_summary"] = [passed(1), passed(2)]
CASES["empty"] = []
CASES["only_noise"] = [noise("VCD info: dumpfile wave.vcd opened for output."),
                       noise("tb.v:42: $finish called at 1000 (1s)")]
CASES["simulator_noise"] = [
    noise("VCD info: dumpfile wave.vcd opened for output."),
    passed(1),
    mismatch("clk", 2, ["1", "0"], ["0"], ["1"]),
    noise("- tb.v:88: Verilog $finish"),
    summary(1, 2),
    noise("tb.v:88: $finish called at 250 (1ps)"),
]
CASES["last_summary_wins"] = [summary(5, 10), passed(1), summary(2, 8)]
CASES["mismatch_lines_exceed_summary"] = [
    mismatch("clk", i, ["0"], ["1"], ["0"]) for i in range(1, 5)] + [summary(2, 3)]
CASES["width_mismatch_ignored"] = [
    mismatch("clk", 1, ["0"], ["1"], ["0"]),
    noise("Mismatch at clk 2: Inputs = [0], Generated = [1, 0], Reference = [0]"),
    summary(2, 5),
]
CASES["invalid_summary_ignored"] = [
    passed(1),
    noise("7 mismatches out of 3 total tests."),
    noise("0 mismatches out of 0 total tests."),
    summary(0, 1),
]
CASES["indented_lines"] = [
    (("line", "   Test 1 passed!"), ("passed", 1)),
    (("line", "\tMismatch at clk 2: Inputs = [a], Generated = [b], Reference = [c]"),
     ("mismatch", {"position_kind": "clk", "position": 2, "inputs": ["a"],
                   "generated": ["b"], "reference": ["c"]})),
    (("line", "  1 mismatches out of 2 total tests.  "), ("summary", (1, 2))),
]
CASES["crlf"] = [passed(1), mismatch("clk", 2, ["1"], ["0"], ["1"]), summary(1, 2)]
CASES["empty_input_list"] = [mismatch("cycle", 0, [], ["x"], ["0"]), summary(1, 1)]
CASES["hex_and_x_values"] = [
    mismatch("clk", 3, ["ff", "0a"], ["xx", "zz"], ["ff", "0a"]),
    mismatch("clk", 4, ["00", "01"], ["1x", "00"], ["10", "00"]),
    summary(2, 9),
]
CASES["large_counts"] = [summary(123456, 1000000)]
CASES["near_miss_lines"] = [
    noise("Test passed!"),
    noise("test 3 passed!"),
    noise("Mismatch at clk: Inputs = [0], Generated = [1], Reference = [0]"),
    noise("3 mismatch out of 4 total tests."),
    noise("All tests passed"),
    passed(4),
    summary(0, 4),
]
CASES["summary_and_all_passed"] = [passed(1), passed(2), all_passed(), summary(0, 2)]
CASES["long_run"] = [
    (passed(i) if i % 7 else mismatch("clk", i, [bits(i, 8)], [bits(i ^ 1, 8)], [bits(i, 8)]))
    for i in range(1, 101)] + [summary(14, 100)]
CASES["failure_then_all_passed_text"] = [
    mismatch("clk", 1, ["0"], ["1"], ["0"]),
    all_passed(),
]


def main():
    for old in OUT.glob("*"):
        old.unlink()
    for name, events in CASES.items():
        text, expected = build(events, "\r\n" if name == "crlf" else "\n")
        (OUT / f"{name}.txt").write_bytes(text.encode())
        (OUT / f"{name}.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(CASES)} cases to {OUT}")


if __name__ == "__main__":
    main()
