#!/usr/bin/env python3
"""Tiny lexicon tagger speaking the external-tagger protocol.

Reads raw text on stdin, prints one `surface<TAB>tag` line per token and a
blank line after each sentence. Unknown words are tagged NN. With
`--emit-bad` it prints a line without a tab, with `--fail` it exits 3.
"""
import re
import sys

LEXICON = {
    "i": "PRP", "we": "PRP", "they": "PRP", "it": "PRP",
    "run": "VBP", "runs": "VBZ", "ran": "VBD", "is": "VBZ", "are": "VBP",
    "the": "DT", "a": "DT", "this": "DT",
    "of": "IN", "in": "IN", "on": "IN", "with": "IN",
    "to": "TO", "and": "CC", "but": "CC",
    "quickly": "RB", "very": "RB",
    "big": "JJ", "small": "JJ",
    ".": ".", ",": ",", ":": ":", ";": ":", "?": ".", "!": ".",
}


def main() -> int:
    if "--fail" in sys.argv:
        sys.stderr.write("demo tagger: forced failure\n")
        return 3
    text = sys.stdin.read()
    if "--emit-bad" in sys.argv:
        print("run")
        return 0
    out = []
    for tok in re.findall(r"\w+|[^\w\s]", text):
        out.append(f"{tok}\t{LEXICON.get(tok.lower(), 'NN')}")
        if tok in {".", "?", "!"}:
            out.append("")
    if out and out[-1] != "":
        out.append("")
    sys.stdout.write("\n".join(out) + ("\n" if out else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
