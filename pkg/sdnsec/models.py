from django.db import models


class SimulationRun(models.Model):
    scenario = models.CharField(max_length=200)
    path = models.CharField(max_length=500, blank=True)
    seed = models.BigIntegerField(default=0)
    started = models.DateTimeField(auto_now_add=True)
    passed = models.BooleanField(default=False)
    injected = models.PositiveIntegerField(default=0)
    deliveries = models.PositiveIntegerField(default=0)
    drops = models.PositiveIntegerField(default=0)
    reports = models.PositiveIntegerField(default=0)
    failures = models.TextField(blank=True, help_text="One failed check per line.")

    class Meta:
        ordering = ['-started']

    def __str__(self): return f"{self.scenario} (seed {self.seed})"

    @classmethod
    def record(cls, summary, path=''):
        """Store an audited run with its per-flow verdicts and drop counts."""
        run = cls.objects.create(
            scenario=summary.name,
            path=str(path),
            seed=summary.seed,
            passed=summary.passed,
            injected=summary.injected,
            deliveries=summary.deliveries,
            drops=sum(summary.drops.values()),
            reports=sum(summary.verdicts.values()),
            failures='\n'.join(summary.failures),
        )
        verdicts = []
        for name, outcome in sorted(summary.flows.items()):
            for value, count in sorted(outcome.verdicts.items()):
                verdicts.append(FlowVerdictRecord(run=run, flow=name, outcome=value, count=count,
                                                  detail='; '.join(sorted(outcome.mismatch_detail))))
            for analysis in (outcome.replay, outcome.counters):
                if analysis is not None and not analysis.valid:
                    verdicts.append(FlowVerdictRecord(run=run, flow=name, outcome=analysis.outcome.value,
                                                      count=1, detail=analysis.evidence))
        FlowVerdictRecord.objects.bulk_create(verdicts)
        DropRecord.objects.bulk_create(
            DropRecord(run=run, flow=name, reason=reason, count=count)
            for name, outcome in sorted(summary.flows.items())
            for reason, count in sorted(outcome.drops.items())
        )
        return run


class FlowVerdictRecord(models.Model):
    OUTCOME_CHOICES = [
        ('valid', 'Valid'),
        ('pvf_mismatch', 'PVF mismatch'),
        ('replay_suspected', 'Replay suspected'),
        ('counter_inconsistent', 'Counter inconsistent'),
    ]
    run = models.ForeignKey(SimulationRun, on_delete=models.CASCADE, related_name='verdicts')
    flow = models.CharField(max_length=200)
    outcome = models.CharField(max_length=30, choices=OUTCOME_CHOICES)
    count = models.PositiveIntegerField(default=0)
    detail = models.TextField(blank=True)

    class Meta:
        ordering = ['run', 'flow', 'outcome']

    def __str__(self): return f"{self.flow}: {self.outcome} x{self.count}"


class DropRecord(models.Model):
    run = models.ForeignKey(SimulationRun, on_delete=models.CASCADE, related_name='drop_records')
    flow = models.CharField(max_length=200)
    reason = models.CharField(max_length=30)
    count = models.PositiveIntegerField(default=0)

    class Meta:
        ordering = ['run', 'flow', 'reason']

    def __str__(self): return f"{self.flow}: {self.reason} x{self.count}"
