import json
import logging

from attention import conf
from attention.code_model import load_corpus
from attention.exceptions import ConfigurationError
from attention.gaze_ingest import write_fixation_csv
from attention.management.base import AttentionCommand
from attention.scanpath_synth import SynthConfig, generate_corpus, scanpath_to_records, synthesize_corpus

logger = logging.getLogger(__name__)


class Command(AttentionCommand):
    help = 'Synthesize locality-biased scanpaths; writes fixations.csv (and snippets.jsonl with --generate).'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--snippets', help='Snippet directory or JSONL file to synthesize scanpaths over.')
        source.add_argument('--generate', type=int, metavar='N', help='Generate N Java-like snippets instead of reading a corpus.')
        parser.add_argument('--locality', type=float, default=conf.get('LOCALITY_PROB'),
                            help='Probability that a saccade stays within the window (default: %(default)s).')
        parser.add_argument('--synth-window', type=int, default=conf.get('SYNTH_WINDOW_LINES'),
                            help='Line window of a local saccade (default: %(default)s).')
        parser.add_argument('--fixations-per-snippet', type=int, default=conf.get('FIXATIONS_PER_SNIPPET'),
                            help='Fixations drawn per snippet (default: %(default)s).')

    def perform(self, **options):
        config = SynthConfig.from_settings(locality_prob=options['locality'], window_lines=options['synth_window'],
                                           fixations_per_snippet=options['fixations_per_snippet'], seed=options['seed'])
        if options['generate'] is not None:
            if options['generate'] < 1:
                raise ConfigurationError(f"--generate must be >= 1, got {options['generate']}")
            corpus = generate_corpus(options['generate'], options['seed'])
            with open(self.out_path(options, 'snippets.jsonl'), 'w', encoding='utf-8') as out:
                for snippet_id, snippet in corpus.items():
                    out.write(json.dumps({'id': snippet_id, 'source': snippet.source}, sort_keys=True) + '\n')
            logger.info("[Synth] generated %d snippets", len(corpus))
        else:
            corpus = load_corpus(options['snippets'])

        scanpaths = synthesize_corpus(corpus, config)
        records = [r for snippet_id in sorted(scanpaths) for r in scanpath_to_records(scanpaths[snippet_id], corpus[snippet_id])]
        with open(self.out_path(options, 'fixations.csv'), 'w', encoding='utf-8', newline='') as out:
            write_fixation_csv(records, out)
