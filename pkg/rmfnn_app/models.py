from typing import Iterable, Optional
from django.db import models
from django.db.utils import Error
from django.utils import timezone

from rmfnn_app.utils.constants import ProblemId, Method, RunStatus
from surrogate_lab.logger import logger


class ExperimentRun(models.Model):
    """
    One execution of an experiment command. The ledger is written from the main thread only.
    """
    command = models.CharField(max_length=32)
    problem = models.CharField(max_length=16, choices=ProblemId.choices, blank=True)
    config = models.JSONField(default=dict)
    output_dir = models.CharField(max_length=512, blank=True)
    status = models.CharField(max_length=16, choices=RunStatus.choices, default=RunStatus.RUNNING)
    started_at = models.DateTimeField(auto_now_add=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']

    def __str__(self):
        return '{} {} ({})'.format(self.command, self.problem, self.status)

    @classmethod
    def start(cls, command: str, problem: str = '', config: Optional[dict] = None,
              output_dir: str = '') -> Optional['ExperimentRun']:
        """
        Creates the ledger entry of a run. Returns None when the database is not available.
        """
        try:
            return cls.objects.create(command=command, problem=problem or '', config=config or {},
                                      output_dir=str(output_dir))
        except Error:
            logger.error('The run of {} could not be recorded in the ledger'.format(command))
            return None

    def record_trials(self, results: Iterable[dict]) -> bool:
        """
        Stores the trial results of the run. Keys that are not trial fields are ignored.
        """
        field_names = {f.name for f in TrialResult._meta.get_fields()} - {'id', 'run', 'created_at'}
        try:
            TrialResult.objects.bulk_create([
                TrialResult(run=self, **{key: value for key, value in result.items() if key in field_names})
                for result in results])
            return True
        except Error:
            logger.error('The trials of run {} could not be recorded'.format(self.pk))
            return False

    def finish(self, status: str = RunStatus.FINISHED) -> bool:
        try:
            self.status = status
            self.finished_at = timezone.now()
            self.save()
            return True
        except Error:
            logger.error('The run {} could not be marked as {}'.format(self.pk, status))
            return False


class TrialResult(models.Model):
    """
    The outcome of one trial: a trained surrogate evaluated for a seed, a sample count or a tolerance.
    """
    run = models.ForeignKey(ExperimentRun, on_delete=models.CASCADE, related_name='trials')
    method = models.CharField(max_length=16, choices=Method.choices)
    seed = models.CharField(max_length=24)
    n_hf = models.PositiveIntegerField(null=True, blank=True)
    width = models.PositiveIntegerField(null=True, blank=True)
    depth = models.PositiveIntegerField(null=True, blank=True)
    eps_tol = models.FloatField(null=True, blank=True)
    mse = models.FloatField(null=True, blank=True)
    error = models.FloatField(null=True, blank=True)
    diverged = models.BooleanField(default=False)
    epochs_run = models.PositiveIntegerField(null=True, blank=True)
    train_time_s = models.FloatField(null=True, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['id']

    def __str__(self):
        return '{} seed {}'.format(self.method, self.seed)
