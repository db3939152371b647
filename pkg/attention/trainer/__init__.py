from attention.trainer.loop import (Batch, LossBreakdown, PassKind, TrainConfig, TrainingExample, TrainingHistory,
                                    build_examples, encode_batch, gradient_check, loss_and_gradients, predict,
                                    predict_examples, random_batch, split_dataset, token_accuracy, train_epoch,
                                    write_history)
from attention.trainer.model import MiniLabeler, ModelConfig, load_model, save_model
from attention.trainer.optim import AdamW, AdamWState
