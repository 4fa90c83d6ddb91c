from scipy import stats as scistats

from ..core import settings


def _fmt(value, spec: str = " .3f") -> str:
    return " n/a" if value is None else format(value, spec)


def generateAndPrintDisentanglementReport(logger: object, disentanglement: dict, utterances: int, runName: str):
    """Generating and printing the probe matrix / code MI report for one evaluation split"""

    matrix = disentanglement["probeMatrix"]
    testCount = disentanglement["probeTestUtterances"]
    rows = []
    for factor in settings.factors:
        cells = []
        for label in settings.labelNames:
            accuracy = matrix[factor][label]
            lower, _, upper = wilsonConfidenceInterval(round(accuracy * testCount), testCount)
            marker = "*" if settings.factors.index(factor) == settings.labelNames.index(label) else " "
            cells.append(f"{accuracy: .1%}{marker}[{lower:.2f},{upper:.2f}]")
        rows.append(f"├─ {factor:<8}" + "  ".join(cells))

    miLines = []
    pairs = list(disentanglement["codeMi"])
    for i, pair in enumerate(pairs):
        branch = "└─" if i == len(pairs) - 1 else "├─"
        miLines.append(f"{branch} {pair:<16} tokens:{_fmt(disentanglement['codeMi'][pair], ' .4f')} nats"
                       f" | CLUB:{_fmt(disentanglement['club'].get(pair), ' .4f')}"
                       f" | MINE:{_fmt(disentanglement['mine'].get(pair), ' .4f')}")

    warning = ""
    if disentanglement["miWarning"]:
        warning = f"\n!! only {utterances} utterances: token MI estimates are unreliable\n"

    insights = f"""\
╔════════════════════════════════════════════════════════════════╗
║                  FACTOR DISENTANGLEMENT REPORT                 ║
║{("Run: " + runName + " | Split: " + disentanglement["split"]).center(64)}║
╚════════════════════════════════════════════════════════════════╝

PROBE ACCURACY (rows: representation, columns: {' / '.join(settings.labelNames)}; * target, 95% CI)
{chr(10).join(rows)}
└─ Target probes beat every same-row leakage probe: {"yes" if disentanglement["targetAboveLeakage"] else "no"}

MUTUAL INFORMATION BETWEEN FACTORS
{chr(10).join(miLines)}
{warning}
DATA
├─ Utterances encoded: {utterances}
└─ Probe test utterances: {testCount}
"""

    logger.info(insights)


def generateAndPrintGenerationReport(logger: object, generation: dict, runName: str):
    """Generating and printing the reconstruction / compositional report"""

    sections = []
    for task in ("reconstruction", "compositional"):
        summary = generation.get(task)
        if not summary or summary["count"] == 0:
            sections.append(f"{task.upper()}: no samples")
            continue
        lower, timbreWins, upper = wilsonConfidenceInterval(summary["secsTimbreWins"], summary["secsComparisons"])
        emoLower, emotionWins, emoUpper = wilsonConfidenceInterval(summary["corrEmotionWins"], summary["corrComparisons"])
        sections.append(f"""\
{task.upper()} ({summary["count"]} samples)
├─ Content error rate:{_fmt(summary["contentErrorRate"], ' .1%')}
├─ SECS toward timbre reference:{_fmt(summary["secs"])}
├─ SECS toward content source:{_fmt(summary["secsSource"])}
├─ F0 Log RMSE:{_fmt(summary["logRmse"])} | Corr:{_fmt(summary["corr"])} ({summary["f0Undefined"]} undefined)
├─ Timbre wins over content source:{timbreWins: .1%} (95% CI:{lower: .1%} -{upper: .1%})
└─ Emotion corr beats mismatched control:{emotionWins: .1%} (95% CI:{emoLower: .1%} -{emoUpper: .1%})
""")

    insights = f"""\
╔════════════════════════════════════════════════════════════════╗
║                    SPEECH GENERATION REPORT                    ║
║{("Run: " + runName).center(64)}║
╚════════════════════════════════════════════════════════════════╝

{chr(10).join(sections)}"""

    logger.info(insights)


def wilsonConfidenceInterval(successes, total, confidence = 0.95):
    """
    Calculate Wilson Score confidence interval for a proportion.
    successes: number of successes (e.g., correctly probed utterances)
    total: total trials
    confidence: confidence level (default 0.95 for 95% CI)
    Returns:
        (lower_bound, point_estimate, upper_bound)
    """
    if total == 0:
        return (0, 0, 0)

    p = successes / total
    z = scistats.norm.ppf((1 + confidence) / 2)

    denominator = 1 + z**2 / total
    center = (p + z**2 / (2 * total)) / denominator
    margin = z * (p * (1 - p) / total + z**2 / (4 * total**2))**0.5 / denominator

    return (max(0, center - margin), round(p, 2), min(1, center + margin))
