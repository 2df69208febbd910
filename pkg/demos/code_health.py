"""Score two small source files, one per dialect, and show what drives the score."""

from triage.codehealth import analyze_file, composite_score, penalties

tangled = """
int parse(char *s, int n, int mode, int flags, int depth, int strict, int verbose) {
    int i = 0;
    while (i < n) {
        if (s[i] == '{' && mode) {
            for (int j = i; j < n; j++) {
                if (s[j] == '}' || flags) { depth--; }
                else if (strict && s[j] == ';') { return -1; }
            }
        }
        switch (s[i]) { case 'a': i++; break; case 'b': i += 2; break; default: i++; }
    }
    return verbose ? depth : 0;
}
"""

tidy = '''
def total_price(items, tax_rate):
    """Sum line prices and apply tax."""
    subtotal = sum(item.price * item.quantity for item in items)
    return round(subtotal * (1 + tax_rate), 2)
'''

for name, src, dialect in [("tangled.c", tangled, "brace"), ("tidy.py", tidy, "indent")]:
    v = analyze_file(src, dialect)
    score = composite_score(v)
    print(f"{name}: health {score.value:.2f} ({score.band.value})")
    for factor, penalty in penalties(v).items():
        if penalty > 0:
            print(f"    {factor:<22} value {getattr(v, factor):7.2f}  costs {penalty:.2f} points")
