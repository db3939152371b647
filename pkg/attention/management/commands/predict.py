from attention.management.base import AttentionCommand
from attention.reward import write_label_file
from attention.trainer import predict


class Command(AttentionCommand):
    help = 'Label every snippet of a corpus with a trained model; writes predictions.jsonl.'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        self.add_corpus_arguments(parser)
        parser.add_argument('--model', help='Model file (default: <out>/model.bin).')

    def perform(self, **options):
        model = self.load_model(options)
        corpus = self.load_corpus(options)
        predictions = {snippet_id: predict(model, snippet) for snippet_id, snippet in corpus.items()}
        with open(self.out_path(options, 'predictions.jsonl'), 'w', encoding='utf-8') as out:
            write_label_file(predictions, out)
