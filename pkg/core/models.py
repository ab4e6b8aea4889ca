from django.db import models


class AuditedModel(models.Model):
    date_created = models.DateTimeField("Created at", auto_now_add=True)
    date_changed = models.DateTimeField("Changed at", auto_now=True)
    active = models.BooleanField(verbose_name="Active", default=True)

    class Meta:
        abstract = True


class RunRecord(AuditedModel):
    class Status(models.TextChoices):
        SUCCEEDED = "SUCCEEDED", "Succeeded"
        FAILED = "FAILED", "Failed"

    command = models.CharField(max_length=64)
    seed = models.BigIntegerField(null=True, blank=True)
    config_hash = models.CharField(max_length=64, db_index=True)
    config = models.JSONField()
    options = models.JSONField(default=dict)
    outputs = models.JSONField(default=list)
    status = models.CharField(max_length=16, choices=Status.choices, default=Status.SUCCEEDED)
    message = models.TextField(blank=True)

    def __str__(self):
        return f"{self.command} (seed={self.seed}, config={self.config_hash[:12]})"
