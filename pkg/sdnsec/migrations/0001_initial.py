# Generated by Django 5.0.1 on 2026-10-19 10:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scenario', models.CharField(max_length=200)),
                ('path', models.CharField(blank=True, max_length=500)),
                ('seed', models.BigIntegerField(default=0)),
                ('started', models.DateTimeField(auto_now_add=True)),
                ('passed', models.BooleanField(default=False)),
                ('injected', models.PositiveIntegerField(default=0)),
                ('deliveries', models.PositiveIntegerField(default=0)),
                ('drops', models.PositiveIntegerField(default=0)),
                ('reports', models.PositiveIntegerField(default=0)),
                ('failures', models.TextField(blank=True, help_text='One failed check per line.')),
            ],
            options={
                'ordering': ['-started'],
            },
        ),
        migrations.CreateModel(
            name='DropRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('flow', models.CharField(max_length=200)),
                ('reason', models.CharField(max_length=30)),
                ('count', models.PositiveIntegerField(default=0)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='drop_records', to='sdnsec.simulationrun')),
            ],
            options={
                'ordering': ['run', 'flow', 'reason'],
            },
        ),
        migrations.CreateModel(
            name='FlowVerdictRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('flow', models.CharField(max_length=200)),
                ('outcome', models.CharField(choices=[('valid', 'Valid'), ('pvf_mismatch', 'PVF mismatch'), ('replay_suspected', 'Replay suspected'), ('counter_inconsistent', 'Counter inconsistent')], max_length=30)),
                ('count', models.PositiveIntegerField(default=0)),
                ('detail', models.TextField(blank=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='verdicts', to='sdnsec.simulationrun')),
            ],
            options={
                'ordering': ['run', 'flow', 'outcome'],
            },
        ),
    ]
