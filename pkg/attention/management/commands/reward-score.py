import json

from attention.management.base import AttentionCommand
from attention.reward import RewardWeights, read_label_file, score_label_files


class Command(AttentionCommand):
    help = 'Hard reward of a prediction label file against a gold label file, printed as JSON.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--pred', required=True, help='Predicted labels (JSONL).')
        parser.add_argument('--gold', required=True, help='Gold labels (JSONL).')

    def perform(self, **options):
        with open(options['pred'], encoding='utf-8') as pred, open(options['gold'], encoding='utf-8') as gold:
            score = score_label_files(read_label_file(pred), read_label_file(gold), RewardWeights.from_settings())
        self.stdout.write(json.dumps({'value': score.value, 'pattern_acc': score.pattern_acc,
                                      'position_acc': score.position_acc}, sort_keys=True))
