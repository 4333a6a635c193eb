# Generated by Django 5.2.7

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
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
                ('command', models.CharField(choices=[('simulate', 'Simulate'), ('stability', 'Stability map'), ('sweep', 'Sweep member')], max_length=16)),
                ('label', models.CharField(blank=True, max_length=100)),
                ('status', models.CharField(choices=[('running', 'Running'), ('completed', 'Completed'), ('failed', 'Failed')], default='running', max_length=16)),
                ('scenario', models.CharField(blank=True, choices=[('single_class', 'Single class (look-ahead ARZ)'), ('mixed_even', 'Mixed, CAVs evenly distributed'), ('mixed_segregated', 'Mixed, CAVs in one block')], max_length=32)),
                ('lookahead', models.FloatField(blank=True, help_text='Look-ahead distance (m).', null=True)),
                ('penetration', models.FloatField(blank=True, null=True)),
                ('duration', models.FloatField(blank=True, help_text='Simulated time (s).', null=True)),
                ('output_dir', models.CharField(max_length=500)),
                ('config_text', models.TextField(blank=True)),
                ('final_amplitude', models.FloatField(blank=True, null=True)),
                ('peak_amplitude', models.FloatField(blank=True, null=True)),
                ('convergence_time', models.FloatField(blank=True, null=True)),
                ('mass_drift', models.FloatField(blank=True, null=True)),
                ('error', models.TextField(blank=True)),
            ],
            options={
                'ordering': ('-created_at',),
            },
        ),
    ]
