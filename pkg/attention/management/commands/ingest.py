import json
import logging

from attention.exceptions import DataError
from attention.gaze_ingest import fixated_set, locality_stats, reading_order, write_locality_report
from attention.management.base import AttentionCommand

logger = logging.getLogger(__name__)


class Command(AttentionCommand):
    help = 'Map a fixation CSV onto snippet tokens; writes scanpaths.jsonl and locality.csv.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_corpus_arguments(parser, fixations=True)
        self.add_augment_arguments(parser)

    def perform(self, **options):
        self.check_augment_options(options)
        corpus = self.load_corpus(options)
        scanpaths = self.load_scanpaths(options, corpus)

        with open(self.out_path(options, 'scanpaths.jsonl'), 'w', encoding='utf-8') as out:
            for snippet_id in sorted(scanpaths):
                scanpath = scanpaths[snippet_id]
                order = reading_order(scanpath, options['pi_cap'])
                out.write(json.dumps({
                    'snippet_id': snippet_id,
                    'events': [[e.token_index, e.duration_ms] for e in scanpath.events],
                    'unmapped_count': scanpath.unmapped_count,
                    'fixated_tokens': len(fixated_set(scanpath)),
                    'reading_order': sorted(order, key=order.get),
                }, sort_keys=True, separators=(',', ':')) + '\n')

        try:
            report = locality_stats(scanpaths.values(), corpus)
        except DataError as exc:
            logger.warning("[GazeIngest] locality report skipped: %s", exc)
            return
        with open(self.out_path(options, 'locality.csv'), 'w', encoding='utf-8', newline='') as out:
            write_locality_report(report, out)
        logger.info("[GazeIngest] %d transitions, within 3 lines: %.3f", report.transitions, report.fractions[3])
