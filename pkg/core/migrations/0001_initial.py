# Generated by Django 5.2.7 on 2026-10-19 09:00

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('date_created', models.DateTimeField(auto_now_add=True, verbose_name='Created at')),
                ('date_changed', models.DateTimeField(auto_now=True, verbose_name='Changed at')),
                ('active', models.BooleanField(default=True, verbose_name='Active')),
                ('command', models.CharField(max_length=64)),
                ('seed', models.BigIntegerField(blank=True, null=True)),
                ('config_hash', models.CharField(db_index=True, max_length=64)),
                ('config', models.JSONField()),
                ('options', models.JSONField(default=dict)),
                ('outputs', models.JSONField(default=list)),
                ('status', models.CharField(choices=[('SUCCEEDED', 'Succeeded'), ('FAILED', 'Failed')], default='SUCCEEDED', max_length=16)),
                ('message', models.TextField(blank=True)),
            ],
            options={
                'abstract': False,
            },
        ),
    ]
