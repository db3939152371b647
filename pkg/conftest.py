import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'gazeattn_project.settings')
django.setup()
