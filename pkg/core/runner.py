from django.test.runner import DiscoverRunner


class LayoutTestRunner(DiscoverRunner):
    """Skips the desk-scale acceptance runs unless tags are requested explicitly."""

    def __init__(self, *args, tags=None, exclude_tags=None, **kwargs):
        if not tags:
            exclude_tags = set(exclude_tags or ()) | {"acceptance"}
        super().__init__(*args, tags=tags, exclude_tags=exclude_tags, **kwargs)
