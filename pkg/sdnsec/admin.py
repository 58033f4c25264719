from django.contrib import admin

from .models import DropRecord, FlowVerdictRecord, SimulationRun


class FlowVerdictInline(admin.TabularInline):
    model = FlowVerdictRecord
    extra = 0
    fields = ('flow', 'outcome', 'count', 'detail')
    readonly_fields = fields


class DropInline(admin.TabularInline):
    model = DropRecord
    extra = 0
    fields = ('flow', 'reason', 'count')
    readonly_fields = fields


@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    list_display = ('scenario', 'seed', 'started', 'passed', 'deliveries', 'drops', 'reports')
    list_filter = ('passed', 'scenario')
    search_fields = ('scenario', 'path')
    inlines = [FlowVerdictInline, DropInline]


@admin.register(FlowVerdictRecord)
class FlowVerdictRecordAdmin(admin.ModelAdmin):
    list_display = ('run', 'flow', 'outcome', 'count')
    list_filter = ('outcome',)
    search_fields = ('flow', 'detail')


@admin.register(DropRecord)
class DropRecordAdmin(admin.ModelAdmin):
    list_display = ('run', 'flow', 'reason', 'count')
    list_filter = ('reason',)
