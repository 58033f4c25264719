"""
URL configuration for core project.

Recorded simulation runs are browsed through the admin; there are no other views.
"""

from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
